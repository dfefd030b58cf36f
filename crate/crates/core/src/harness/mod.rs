//! Monte Carlo comparison of policy-synthesis methods on randomly generated
//! systems, and the first-rule timing benchmark.
//!
//! One repetition draws a fresh system, generates past data with an FPD policy
//! tuned to a past ideal, then runs every requested method for `h_current`
//! epochs against the current ideal and counts visits to the preferred state.
//! All randomness comes from substreams of the root seed keyed by
//! `(run_id, purpose)`, so adding or removing a method never changes the
//! numbers of the others.

mod bench;
mod config;
mod experiment;
mod generate;
mod ideals;
mod methods;
mod summary;

pub use bench::{bench_rule_time, write_bench_csv, BenchConfig, BenchRow};
pub use config::{ExperimentConfig, Method, PastIdeal};
pub use experiment::{
    run_experiment, run_experiment_partial, run_repetition, write_runs_csv, ExperimentOutput,
    RunResult, THREADS_ENV,
};
pub use generate::{generate_past_data, generate_system};
pub use ideals::{make_current_ideal, make_past_ideal, preference_ideal, UNWANTED_PROB};
pub use methods::{run_method, MethodInputs};
pub use summary::{paired_differences, quartiles, summarize, write_summary_csv, GainSummary};
