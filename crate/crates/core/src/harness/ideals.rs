use crate::error::{FpdError, Result};
use crate::model::{DecisionRule, IdealClosedLoopModel, StateActionSpace, TransitionModel};

use super::config::PastIdeal;

/// Ideal probability of reaching a state the task does not want.
pub const UNWANTED_PROB: f64 = 0.00001;

/// Ideal with uniform action preference and next-state distribution that
/// splits the mass equally over `favoured` states, leaving [`UNWANTED_PROB`]
/// on every other state.
pub fn preference_ideal(
    space: StateActionSpace,
    favoured: &[usize],
) -> Result<IdealClosedLoopModel> {
    for &s in favoured {
        space.check_state(s)?;
    }
    if favoured.is_empty() {
        return Err(FpdError::AllZeroIdeal);
    }
    let n_other = space.n_states - favoured.len();
    let high = (1.0 - n_other as f64 * UNWANTED_PROB) / favoured.len() as f64;
    let row: Vec<f64> = (0..space.n_states)
        .map(|s| {
            if favoured.contains(&s) {
                high
            } else {
                UNWANTED_PROB
            }
        })
        .collect();
    IdealClosedLoopModel::new(
        TransitionModel::from_row(space, &row)?,
        DecisionRule::uniform(space),
    )
}

fn canned_row(kind: PastIdeal) -> [f64; 3] {
    match kind {
        PastIdeal::P1 => [0.99998, 0.00001, 0.00001],
        PastIdeal::P12 => [0.499995, 0.499995, 0.00001],
        PastIdeal::P3 => [0.00001, 0.00001, 0.99998],
    }
}

/// One of the three past-task ideals over a three-state system.
pub fn make_past_ideal(kind: PastIdeal, space: StateActionSpace) -> Result<IdealClosedLoopModel> {
    if space.n_states != 3 {
        return Err(FpdError::WrongSize {
            kind: match kind {
                PastIdeal::P1 => "P1",
                PastIdeal::P12 => "P12",
                PastIdeal::P3 => "P3",
            },
            n_states: space.n_states,
        });
    }
    IdealClosedLoopModel::new(
        TransitionModel::from_row(space, &canned_row(kind))?,
        DecisionRule::uniform(space),
    )
}

/// Current task: reach `s^1`. Same table as [`PastIdeal::P1`].
pub fn make_current_ideal(space: StateActionSpace) -> Result<IdealClosedLoopModel> {
    make_past_ideal(PastIdeal::P1, space)
}
