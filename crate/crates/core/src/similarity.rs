//! Similarity of past transitions to the current ideal closed-loop model.
//!
//! The raw similarity of a triple is the ideal joint probability
//! `ⁱp(s, a | s')` it attains. The normalized variant divides by the largest
//! value of the ideal joint, so the most desirable transition scores exactly 1.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FpdError, Result};
use crate::model::{ClosedLoopRecord, IdealClosedLoopModel, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMode {
    Raw,
    #[default]
    Normalized,
}

pub fn similarity(ideal: &IdealClosedLoopModel, triple: Triple) -> Result<f64> {
    ideal.space().check_triple(&triple)?;
    Ok(ideal.joint(triple.prev, triple.action, triple.next))
}

/// Largest value of the ideal joint over every `(s', a, s)` tuple.
pub fn sigma_max(ideal: &IdealClosedLoopModel) -> Result<f64> {
    let (_, max) = ideal.joint_extremes();
    if max > 0.0 {
        Ok(max)
    } else {
        Err(FpdError::AllZeroIdeal)
    }
}

pub fn normalized_similarity(ideal: &IdealClosedLoopModel, triple: Triple) -> Result<f64> {
    let max = sigma_max(ideal)?;
    Ok(similarity(ideal, triple)? / max)
}

/// Scores triples against a fixed ideal with `σ_max` computed once.
#[derive(Debug, Clone)]
pub struct SimilarityScorer<'a> {
    ideal: &'a IdealClosedLoopModel,
    mode: SimilarityMode,
    sigma_max: f64,
}

impl<'a> SimilarityScorer<'a> {
    pub fn new(ideal: &'a IdealClosedLoopModel, mode: SimilarityMode) -> Result<Self> {
        let sigma_max = sigma_max(ideal)?;
        Ok(Self {
            ideal,
            mode,
            sigma_max,
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn mode(&self) -> SimilarityMode {
        self.mode
    }

    pub fn score(&self, triple: Triple) -> Result<f64> {
        let raw = similarity(self.ideal, triple)?;
        Ok(match self.mode {
            SimilarityMode::Raw => raw,
            SimilarityMode::Normalized => raw / self.sigma_max,
        })
    }
}

/// One weight per triple of a record, in trajectory order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityWeights {
    pub omega: Vec<f64>,
    pub mode: SimilarityMode,
    /// Present iff `mode` is normalized.
    pub sigma_max: Option<f64>,
}

impl SimilarityWeights {
    pub fn is_normalized(&self) -> bool {
        self.mode == SimilarityMode::Normalized
    }

    /// Writes the weights as a single `omega` CSV column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega"])?;
        for v in &self.omega {
            w.write_record([v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn weigh_record(
    ideal: &IdealClosedLoopModel,
    record: &ClosedLoopRecord,
    mode: SimilarityMode,
) -> Result<SimilarityWeights> {
    if record.is_empty() {
        return Err(FpdError::EmptyRecord);
    }
    let scorer = SimilarityScorer::new(ideal, mode)?;
    let omega = record
        .triples()
        .map(|t| scorer.score(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityWeights {
        omega,
        mode,
        sigma_max: (mode == SimilarityMode::Normalized).then_some(scorer.sigma_max()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecisionRule, StateActionSpace, TransitionModel};

    fn current_ideal() -> IdealClosedLoopModel {
        let sp = StateActionSpace::new(3, 4).unwrap();
        IdealClosedLoopModel::new(
            TransitionModel::from_row(sp, &[0.99998, 0.00001, 0.00001]).unwrap(),
            DecisionRule::uniform(sp),
        )
        .unwrap()
    }

    #[test]
    fn similarity_of_preferred_landing() {
        let s = similarity(&current_ideal(), Triple::new(2, 1, 0)).unwrap();
        assert!((s - 0.249995).abs() < 1e-15);
    }

    #[test]
    fn similarity_of_unwanted_landing() {
        let s = similarity(&current_ideal(), Triple::new(0, 3, 1)).unwrap();
        assert!((s - 2.5e-6).abs() < 1e-18);
    }

    #[test]
    fn uniform_joint_similarity() {
        let sp = StateActionSpace::new(3, 4).unwrap();
        let ideal = IdealClosedLoopModel::new(
            TransitionModel::from_row(sp, &[1.0 / 3.0; 3]).unwrap(),
            DecisionRule::uniform(sp),
        )
        .unwrap();
        for (t, _) in ideal.joint_cells() {
            assert!((similarity(&ideal, t).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        }
        assert!((sigma_max(&ideal).unwrap() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_max_of_current_ideal() {
        assert!((sigma_max(&current_ideal()).unwrap() - 0.249995).abs() < 1e-15);
    }

    #[test]
    fn sigma_max_of_point_mass_ideal() {
        let sp = StateActionSpace::new(2, 1).unwrap();
        let ideal = IdealClosedLoopModel::new(
            TransitionModel::from_row(sp, &[0.0, 1.0]).unwrap(),
            DecisionRule::uniform(sp),
        )
        .unwrap();
        assert_eq!(sigma_max(&ideal).unwrap(), 1.0);
    }

    #[test]
    fn normalized_values() {
        let ideal = current_ideal();
        assert_eq!(
            normalized_similarity(&ideal, Triple::new(1, 2, 0)).unwrap(),
            1.0
        );
        let low = normalized_similarity(&ideal, Triple::new(1, 2, 2)).unwrap();
        assert!((low - 2.5e-6 / 0.249995).abs() < 1e-18);
        assert!((low - 1.00002e-5).abs() < 1e-10);
    }

    #[test]
    fn out_of_range_triple_rejected() {
        assert!(similarity(&current_ideal(), Triple::new(3, 0, 0)).is_err());
        assert!(similarity(&current_ideal(), Triple::new(0, 4, 0)).is_err());
    }

    #[test]
    fn weigh_record_modes() {
        let ideal = current_ideal();
        let sp = ideal.space();
        let rec = ClosedLoopRecord::from_steps(sp, 0, &[(1, 0), (2, 2), (3, 1), (0, 0)]).unwrap();
        let raw = weigh_record(&ideal, &rec, SimilarityMode::Raw).unwrap();
        let norm = weigh_record(&ideal, &rec, SimilarityMode::Normalized).unwrap();
        assert_eq!(raw.omega.len(), 4);
        assert!(raw.sigma_max.is_none());
        let smax = norm.sigma_max.unwrap();
        for (r, n) in raw.omega.iter().zip(&norm.omega) {
            assert!((r - n * smax).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_triples_identical_weights() {
        let ideal = current_ideal();
        let rec = ClosedLoopRecord::from_steps(ideal.space(), 0, &[(1, 0); 7]).unwrap();
        let w = weigh_record(&ideal, &rec, SimilarityMode::Normalized).unwrap();
        assert!(w.omega.iter().all(|&v| v == w.omega[0]));
    }

    #[test]
    fn empty_record_rejected() {
        let ideal = current_ideal();
        let rec = ClosedLoopRecord::new(ideal.space(), 0).unwrap();
        assert_eq!(
            weigh_record(&ideal, &rec, SimilarityMode::Raw).unwrap_err(),
            FpdError::EmptyRecord
        );
    }

    #[test]
    fn csv_dump_has_one_row_per_weight() {
        let w = SimilarityWeights {
            omega: vec![1.0, 0.5],
            mode: SimilarityMode::Raw,
            sigma_max: None,
        };
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "omega\n1\n0.5\n");
    }
}
