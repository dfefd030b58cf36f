use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FpdError, Result};
use crate::model::{Rollout, StateActionSpace};

/// Ideal used to generate the past data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PastIdeal {
    /// Favours `s^1`.
    #[default]
    P1,
    /// Favours `s^1` and `s^2` equally.
    P12,
    /// Favours `s^3`.
    P3,
}

impl PastIdeal {
    pub const ALL: [PastIdeal; 3] = [PastIdeal::P1, PastIdeal::P12, PastIdeal::P3];
}

impl fmt::Display for PastIdeal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PastIdeal::P1 => "P1",
            PastIdeal::P12 => "P12",
            PastIdeal::P3 => "P3",
        })
    }
}

impl FromStr for PastIdeal {
    type Err = FpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P1" => Ok(PastIdeal::P1),
            "P12" => Ok(PastIdeal::P12),
            "P3" => Ok(PastIdeal::P3),
            other => Err(FpdError::Format(format!(
                "unknown past ideal {other:?} (expected P1, P12 or P3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Uniform random actions.
    Rand,
    /// Learned rule from similarity-weighted data, no exploration.
    TL,
    /// Learned rule with similarity-gated ε-greedy exploration.
    TLexplore,
    /// FPD on a transition model estimated from the past data.
    FPDlearn,
    /// FPD with the true transition model.
    FPD,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Rand,
        Method::TL,
        Method::TLexplore,
        Method::FPDlearn,
        Method::FPD,
    ];

    /// Substream tag; fixed per method so results do not depend on the method set.
    pub fn stream_tag(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Rand => "Rand",
            Method::TL => "TL",
            Method::TLexplore => "TLexplore",
            Method::FPDlearn => "FPDlearn",
            Method::FPD => "FPD",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = FpdError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| FpdError::Format(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_states: usize,
    pub n_actions: usize,
    /// FPD optimisation horizon `H`.
    pub horizon: usize,
    /// Length `k` of the past trajectory.
    pub k_past: usize,
    /// Length `h` of the evaluation run.
    pub h_current: usize,
    pub n_reps: usize,
    pub epsilon: f64,
    pub q_threshold: f64,
    pub window_m: usize,
    pub root_seed: u64,
    pub past_ideal: PastIdeal,
    pub methods: Vec<Method>,
    /// Pseudo-count of the transition estimate; `1/|S|` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub rollout_rule: Rollout,
    /// Re-estimate the model and re-plan after every step in `FPDlearn`.
    pub online_model_update: bool,
    /// Keep the TL statistics fixed at the past data during evaluation.
    pub freeze_stats: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_states: 3,
            n_actions: 4,
            horizon: 10,
            k_past: 60,
            h_current: 100,
            n_reps: 100,
            epsilon: 0.3,
            q_threshold: 0.4,
            window_m: 10,
            root_seed: 10,
            past_ideal: PastIdeal::P1,
            methods: Method::ALL.to_vec(),
            kappa: None,
            rollout_rule: Rollout::First,
            online_model_update: false,
            freeze_stats: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        StateActionSpace::new(self.n_states, self.n_actions)?;
        for (name, v) in [
            ("horizon", self.horizon),
            ("k_past", self.k_past),
            ("h_current", self.h_current),
            ("n_reps", self.n_reps),
            ("window_m", self.window_m),
        ] {
            if v == 0 {
                return Err(FpdError::OutOfRange {
                    name,
                    value: 0.0,
                    range: "[1, inf)",
                });
            }
        }
        for (name, v) in [("epsilon", self.epsilon), ("q_threshold", self.q_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(FpdError::OutOfRange {
                    name,
                    value: v,
                    range: "[0, 1]",
                });
            }
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k.is_finite()) {
                return Err(FpdError::OutOfRange {
                    name: "kappa",
                    value: k,
                    range: "(0, inf)",
                });
            }
        }
        if self.methods.is_empty() {
            return Err(FpdError::Format("no methods selected".into()));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<StateActionSpace> {
        StateActionSpace::new(self.n_states, self.n_actions)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(1.0 / self.n_states as f64)
    }

    /// Requested methods in canonical order without duplicates.
    pub fn method_set(&self) -> Vec<Method> {
        let mut ms = self.methods.clone();
        ms.sort();
        ms.dedup();
        ms
    }
}
