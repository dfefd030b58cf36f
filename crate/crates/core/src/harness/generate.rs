use rand::Rng;
use rand_distr::Exp1;

use crate::error::Result;
use crate::fpd::solve_fpd;
use crate::model::{
    simulate_closed_loop, ClosedLoopRecord, IdealClosedLoopModel, PolicyRollout, Rollout,
    StateActionSpace, TransitionModel,
};

/// Random system whose rows are independent flat-Dirichlet draws.
pub fn generate_system<R: Rng + ?Sized>(
    space: StateActionSpace,
    rng: &mut R,
) -> Result<TransitionModel> {
    let ns = space.n_states;
    let mut probs = Vec::with_capacity(ns * space.n_actions * ns);
    let mut row = vec![0.0; ns];
    for _ in 0..ns * space.n_actions {
        // normalized unit exponentials are Dirichlet(1, ..., 1)
        for v in row.iter_mut() {
            *v = rng.sample::<f64, _>(Exp1);
        }
        let sum: f64 = row.iter().sum();
        probs.extend(row.iter().map(|v| v / sum));
    }
    TransitionModel::new(space, probs)
}

/// Past closed-loop data: the FPD policy for `past_ideal` (with full knowledge
/// of `system`) applied for `k` epochs from a uniformly drawn initial state.
pub fn generate_past_data<R: rand::RngCore>(
    system: &TransitionModel,
    past_ideal: &IdealClosedLoopModel,
    horizon: usize,
    k: usize,
    rollout: Rollout,
    rng: &mut R,
) -> Result<ClosedLoopRecord> {
    let policy = solve_fpd(system, past_ideal, horizon)?;
    let s0 = rng.random_range(0..system.space().n_states);
    let mut provider = PolicyRollout {
        policy: &policy,
        rollout,
    };
    simulate_closed_loop(system, &mut provider, s0, k, rng)
}
