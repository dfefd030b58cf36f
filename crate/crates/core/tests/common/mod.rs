#![allow(dead_code)]

use fpd_core::model::{DecisionRule, IdealClosedLoopModel, StateActionSpace, TransitionModel};
use fpd_core::rng::{seeded, SimRng};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub fn space(ns: usize, na: usize) -> StateActionSpace {
    StateActionSpace::new(ns, na).unwrap()
}

/// Flat-Dirichlet row of length `n`, bounded away from zero.
pub fn simplex_row(n: usize, rng: &mut SimRng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| Distribution::<f64>::sample(&Exp1, rng) + 1e-3)
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

pub fn random_transition(sp: StateActionSpace, rng: &mut SimRng) -> TransitionModel {
    let flat = (0..sp.n_states * sp.n_actions)
        .flat_map(|_| simplex_row(sp.n_states, rng))
        .collect();
    TransitionModel::new(sp, flat).unwrap()
}

pub fn random_rule(sp: StateActionSpace, rng: &mut SimRng) -> DecisionRule {
    let flat = (0..sp.n_states)
        .flat_map(|_| simplex_row(sp.n_actions, rng))
        .collect();
    DecisionRule::new(sp, flat).unwrap()
}

pub fn random_ideal(sp: StateActionSpace, rng: &mut SimRng) -> IdealClosedLoopModel {
    IdealClosedLoopModel::new(random_transition(sp, rng), random_rule(sp, rng)).unwrap()
}

/// A system, an ideal and a full-support initial distribution.
pub struct Instance {
    pub system: TransitionModel,
    pub ideal: IdealClosedLoopModel,
    pub p0: Vec<f64>,
}

pub fn random_instance(ns: usize, na: usize, seed: u64) -> Instance {
    let mut rng = seeded(seed);
    let sp = space(ns, na);
    Instance {
        system: random_transition(sp, &mut rng),
        ideal: random_ideal(sp, &mut rng),
        p0: simplex_row(ns, &mut rng),
    }
}

pub fn uniform_index(n: usize, rng: &mut SimRng) -> usize {
    rng.random_range(0..n)
}
