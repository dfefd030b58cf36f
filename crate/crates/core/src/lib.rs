//! Fully probabilistic design (FPD) of decision policies for finite Markov
//! decision processes, and similarity-weighted transfer learning of decision
//! rules from past closed-loop data.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the validated probability objects (transition models,
//!   decision rules, ideal closed-loop models), trajectories and the seeded
//!   closed-loop simulator.
//! * [`fpd`] synthesises KL-optimal policies by backward recursion and
//!   evaluates closed-loop KL divergences exactly.
//! * [`similarity`] scores past transitions against the current ideal.
//! * [`transfer`] learns a decision rule from similarity-weighted data and
//!   gates ε-greedy exploration on recent similarity.
//! * [`estimation`] estimates a transition model from a trajectory.
//! * [`harness`] runs the Monte Carlo comparison of the competing methods and
//!   the first-rule timing benchmark.

pub mod error;
pub mod estimation;
pub mod fpd;
pub mod harness;
pub mod io;
pub mod model;
pub mod rng;
pub mod similarity;
pub mod transfer;

pub use error::{FpdError, Result};
pub use model::{
    ClosedLoopRecord, DecisionRule, IdealClosedLoopModel, Policy, StateActionSpace,
    TransitionModel, Triple,
};
