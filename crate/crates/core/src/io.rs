//! JSON interchange for models, rules, policies and trajectories.
//!
//! Each document carries a header `{ "n_states", "n_actions" }` (plus optional
//! human-readable labels) followed by nested arrays in the same index order as
//! the in-memory tables. Probabilities are written as shortest round-trip
//! decimal literals and re-validated on load.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{FpdError, Result};
use crate::model::{
    ClosedLoopRecord, DecisionRule, IdealClosedLoopModel, Policy, StateActionSpace, TransitionModel,
};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub n_states: usize,
    pub n_actions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Labels>,
}

impl Header {
    fn of(space: StateActionSpace) -> Self {
        Self {
            n_states: space.n_states,
            n_actions: space.n_actions,
            labels: None,
        }
    }

    fn space(&self) -> Result<StateActionSpace> {
        StateActionSpace::new(self.n_states, self.n_actions)
    }

    fn expect(&self, actual: StateActionSpace, what: &str) -> Result<()> {
        if self.space()? != actual {
            return Err(FpdError::Format(format!(
                "{what}: header says {}x{}, tables are {}x{}",
                self.n_states, self.n_actions, actual.n_states, actual.n_actions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionModelDoc {
    #[serde(flatten)]
    pub header: Header,
    pub probs: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRuleDoc {
    #[serde(flatten)]
    pub header: Header,
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyDoc {
    #[serde(flatten)]
    pub header: Header,
    pub rules: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdealDoc {
    #[serde(flatten)]
    pub header: Header,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub rule: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDoc {
    pub action: usize,
    pub next_state: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordDoc {
    #[serde(flatten)]
    pub header: Header,
    pub initial_state: usize,
    pub steps: Vec<StepDoc>,
}

/// Conversion between a domain object and its JSON document.
pub trait JsonDocument: Sized {
    type Doc: Serialize + DeserializeOwned;

    fn to_doc(&self) -> Self::Doc;
    fn from_doc(doc: Self::Doc) -> Result<Self>;

    fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| FpdError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")
            .map_err(|e| FpdError::Io(format!("{}: {e}", path.display())))
    }
}

impl JsonDocument for TransitionModel {
    type Doc = TransitionModelDoc;

    fn to_doc(&self) -> Self::Doc {
        TransitionModelDoc {
            header: Header::of(self.space()),
            probs: self.to_nested(),
        }
    }

    fn from_doc(doc: Self::Doc) -> Result<Self> {
        let m = TransitionModel::from_nested(&doc.probs)?;
        doc.header.expect(m.space(), "transition model")?;
        Ok(m)
    }
}

impl JsonDocument for DecisionRule {
    type Doc = DecisionRuleDoc;

    fn to_doc(&self) -> Self::Doc {
        DecisionRuleDoc {
            header: Header::of(self.space()),
            probs: self.to_nested(),
        }
    }

    fn from_doc(doc: Self::Doc) -> Result<Self> {
        let r = DecisionRule::from_nested(&doc.probs, doc.header.n_states)?;
        doc.header.expect(r.space(), "decision rule")?;
        Ok(r)
    }
}

impl JsonDocument for Policy {
    type Doc = PolicyDoc;

    fn to_doc(&self) -> Self::Doc {
        PolicyDoc {
            header: Header::of(self.space()),
            rules: self.rules().iter().map(DecisionRule::to_nested).collect(),
        }
    }

    fn from_doc(doc: Self::Doc) -> Result<Self> {
        let rules = doc
            .rules
            .iter()
            .map(|r| {
                let rule = DecisionRule::from_nested(r, doc.header.n_states)?;
                doc.header.expect(rule.space(), "policy rule")?;
                Ok(rule)
            })
            .collect::<Result<Vec<_>>>()?;
        Policy::new(rules)
    }
}

impl JsonDocument for IdealClosedLoopModel {
    type Doc = IdealDoc;

    fn to_doc(&self) -> Self::Doc {
        IdealDoc {
            header: Header::of(self.space()),
            transition: self.transition().to_nested(),
            rule: self.rule().to_nested(),
        }
    }

    fn from_doc(doc: Self::Doc) -> Result<Self> {
        let t = TransitionModel::from_nested(&doc.transition)?;
        doc.header.expect(t.space(), "ideal transition")?;
        let r = DecisionRule::from_nested(&doc.rule, doc.header.n_states)?;
        IdealClosedLoopModel::new(t, r)
    }
}

impl JsonDocument for ClosedLoopRecord {
    type Doc = RecordDoc;

    fn to_doc(&self) -> Self::Doc {
        RecordDoc {
            header: Header::of(self.space()),
            initial_state: self.initial_state(),
            steps: self
                .steps()
                .iter()
                .map(|&(action, next_state)| StepDoc { action, next_state })
                .collect(),
        }
    }

    fn from_doc(doc: Self::Doc) -> Result<Self> {
        let steps: Vec<(usize, usize)> =
            doc.steps.iter().map(|s| (s.action, s.next_state)).collect();
        ClosedLoopRecord::from_steps(doc.header.space()?, doc.initial_state, &steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> StateActionSpace {
        StateActionSpace::new(3, 2).unwrap()
    }

    #[test]
    fn transition_model_round_trip() {
        let m = TransitionModel::from_row(space(), &[0.99998, 0.00001, 0.00001]).unwrap();
        let back = TransitionModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn header_mismatch_rejected() {
        let text = r#"{"n_states": 2, "n_actions": 1, "probs": [[[1.0, 0.0, 0.0]], [[1.0, 0.0, 0.0]], [[1.0, 0.0, 0.0]]]}"#;
        assert!(matches!(
            TransitionModel::from_json(text),
            Err(FpdError::Format(_))
        ));
    }

    #[test]
    fn non_stochastic_file_rejected() {
        let text = r#"{"n_states": 2, "n_actions": 1, "probs": [[[0.7, 0.7]], [[1.0, 0.0]]]}"#;
        assert!(matches!(
            TransitionModel::from_json(text),
            Err(FpdError::NonStochastic { .. })
        ));
    }

    #[test]
    fn labels_are_optional_metadata() {
        let text = r#"{"n_states": 1, "n_actions": 2,
            "labels": {"states": ["s1"], "actions": ["a1", "a2"]},
            "probs": [[0.5, 0.5]]}"#;
        let r = DecisionRule::from_json(text).unwrap();
        assert_eq!(r.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn record_round_trip() {
        let rec = ClosedLoopRecord::from_steps(space(), 2, &[(1, 0), (0, 1)]).unwrap();
        let json = rec.to_json().unwrap();
        assert!(json.contains("\"initial_state\": 2"));
        assert_eq!(ClosedLoopRecord::from_json(&json).unwrap(), rec);
    }

    #[test]
    fn record_with_bad_index_rejected() {
        let text = r#"{"n_states": 2, "n_actions": 1, "initial_state": 0,
            "steps": [{"action": 0, "next_state": 5}]}"#;
        assert!(ClosedLoopRecord::from_json(text).is_err());
    }

    #[test]
    fn ideal_and_policy_round_trip() {
        let ideal = IdealClosedLoopModel::new(
            TransitionModel::from_row(space(), &[0.5, 0.25, 0.25]).unwrap(),
            DecisionRule::uniform(space()),
        )
        .unwrap();
        assert_eq!(
            IdealClosedLoopModel::from_json(&ideal.to_json().unwrap()).unwrap(),
            ideal
        );
        let pol = Policy::stationary(DecisionRule::uniform(space()), 3).unwrap();
        assert_eq!(Policy::from_json(&pol.to_json().unwrap()).unwrap(), pol);
    }
}
