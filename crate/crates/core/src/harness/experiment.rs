use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{FpdError, Result};
use crate::model::ClosedLoopRecord;
use crate::rng::{substream, Purpose};

use super::config::{ExperimentConfig, Method};
use super::generate::{generate_past_data, generate_system};
use super::ideals::{make_current_ideal, make_past_ideal};
use super::methods::{run_method, MethodInputs};
use super::summary::{summarize, GainSummary};

/// Env var capping the number of repetitions run in parallel.
pub const THREADS_ENV: &str = "FPD_TL_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run_id: u64,
    pub method: Method,
    /// Visits to `s^1` over the evaluation run.
    pub gain: usize,
    /// Seconds spent synthesising the initial rule (not written to CSV).
    pub wall_time_rule: Option<f64>,
    pub trajectory: Option<ClosedLoopRecord>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Sorted by `(run_id, method)`.
    pub rows: Vec<RunResult>,
}

impl ExperimentOutput {
    pub fn gains(&self, method: Method) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.gain)
            .collect()
    }

    pub fn summary(&self) -> Vec<GainSummary> {
        let mut methods: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        methods
            .into_iter()
            .map(|m| summarize(m.name(), &self.gains(m)))
            .collect()
    }
}

/// One repetition: fresh system and past data, then every requested method on
/// identical inputs.
pub fn run_repetition(cfg: &ExperimentConfig, run_id: u64) -> Result<Vec<RunResult>> {
    let space = cfg.space()?;
    let seed = cfg.root_seed;
    let system = generate_system(space, &mut substream(seed, run_id, Purpose::System))?;
    let past_ideal = make_past_ideal(cfg.past_ideal, space)?;
    let past_data = generate_past_data(
        &system,
        &past_ideal,
        cfg.horizon,
        cfg.k_past,
        cfg.rollout_rule,
        &mut substream(seed, run_id, Purpose::PastData),
    )?;
    let current_ideal = make_current_ideal(space)?;
    let initial_state =
        substream(seed, run_id, Purpose::CurrentStart).random_range(0..space.n_states);

    let inputs = MethodInputs {
        run_id,
        system: &system,
        current_ideal: &current_ideal,
        past_data: &past_data,
        initial_state,
    };
    cfg.method_set()
        .into_iter()
        .map(|m| {
            let mut rng = substream(seed, run_id, Purpose::Method(m.stream_tag()));
            run_method(m, &inputs, cfg, &mut rng)
        })
        .collect()
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every repetition and keeps whatever succeeded. The first failure (in
/// run order) is returned alongside the partial rows.
pub fn run_experiment_partial(cfg: &ExperimentConfig) -> (ExperimentOutput, Option<FpdError>) {
    if let Err(e) = cfg.validate() {
        return (ExperimentOutput { rows: Vec::new() }, Some(e));
    }
    let work = || -> Vec<Result<Vec<RunResult>>> {
        (0..cfg.n_reps as u64)
            .into_par_iter()
            .map(|run_id| {
                run_repetition(cfg, run_id).map(|mut rows| {
                    rows.iter_mut().for_each(|r| r.trajectory = None);
                    rows
                })
            })
            .collect()
    };
    let results = match thread_cap()
        .and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok())
    {
        Some(pool) => pool.install(work),
        None => work(),
    };

    let mut rows = Vec::with_capacity(cfg.n_reps * cfg.methods.len());
    let mut first_error = None;
    for r in results {
        match r {
            Ok(rs) => rows.extend(rs),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    rows.sort_by_key(|r| (r.run_id, r.method));
    (ExperimentOutput { rows }, first_error)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match run_experiment_partial(cfg) {
        (out, None) => Ok(out),
        (_, Some(e)) => Err(e),
    }
}

/// `run_id,method,gain` rows.
pub fn write_runs_csv<W: Write>(rows: &[RunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "method", "gain"])?;
    for r in rows {
        w.write_record([
            r.run_id.to_string(),
            r.method.to_string(),
            r.gain.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
