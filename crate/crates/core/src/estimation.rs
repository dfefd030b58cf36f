//! Bayesian estimate of the transition model from an observed trajectory.

use crate::error::{FpdError, Result};
use crate::model::{ClosedLoopRecord, StateActionSpace, TransitionModel, Triple};

/// Transition counts `[s'][a][s]` with a symmetric Dirichlet pseudo-count.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionStats {
    space: StateActionSpace,
    counts: Vec<f64>,
    kappa: f64,
    observed: usize,
}

impl TransitionStats {
    pub fn new(space: StateActionSpace, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(FpdError::OutOfRange {
                name: "kappa",
                value: kappa,
                range: "(0, inf)",
            });
        }
        Ok(Self {
            space,
            counts: vec![0.0; space.n_states * space.n_actions * space.n_states],
            kappa,
            observed: 0,
        })
    }

    pub fn from_record(record: &ClosedLoopRecord, kappa: f64) -> Result<Self> {
        let mut st = Self::new(record.space(), kappa)?;
        for t in record.triples() {
            st.observe(t)?;
        }
        Ok(st)
    }

    pub fn observe(&mut self, t: Triple) -> Result<()> {
        self.space.check_triple(&t)?;
        let (ns, na) = (self.space.n_states, self.space.n_actions);
        self.counts[(t.prev * na + t.action) * ns + t.next] += 1.0;
        self.observed += 1;
        Ok(())
    }

    pub fn count(&self, prev: usize, action: usize, next: usize) -> f64 {
        let (ns, na) = (self.space.n_states, self.space.n_actions);
        self.counts[(prev * na + action) * ns + next]
    }

    pub fn observed(&self) -> usize {
        self.observed
    }

    /// Posterior-mean model `(n(s',a,s) + κ) / (n(s',a,·) + |S| κ)`.
    pub fn posterior_mean(&self) -> Result<TransitionModel> {
        let ns = self.space.n_states;
        let mut probs = Vec::with_capacity(self.counts.len());
        for row in self.counts.chunks(ns) {
            let den: f64 = row.iter().sum::<f64>() + ns as f64 * self.kappa;
            probs.extend(row.iter().map(|&c| (c + self.kappa) / den));
        }
        TransitionModel::new(self.space, probs)
    }
}

/// Default pseudo-count `1/|S|`.
pub fn default_kappa(space: StateActionSpace) -> f64 {
    1.0 / space.n_states as f64
}

pub fn estimate_transition(record: &ClosedLoopRecord, kappa: f64) -> Result<TransitionModel> {
    TransitionStats::from_record(record, kappa)?.posterior_mean()
}
