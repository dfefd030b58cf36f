//! Wall time to produce the first decision rule, per method and state-space size.
//!
//! Each measurement repeats the computation enough times to fill a short
//! batch, and the reported number is the median over batches.

use std::hint::black_box;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::{FpdError, Result};
use crate::estimation::estimate_transition;
use crate::fpd::solve_fpd;
use crate::model::{ClosedLoopRecord, IdealClosedLoopModel, Rollout, StateActionSpace};
use crate::rng::{substream, Purpose};
use crate::similarity::similarity;
use crate::transfer::{gated_choice, learned_rule_from_data, ExplorationConfig};

use super::config::Method;
use super::generate::{generate_past_data, generate_system};
use super::ideals::preference_ideal;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub state_sizes: Vec<usize>,
    pub n_actions: usize,
    pub k: usize,
    pub horizon: usize,
    /// Timed batches per point; the median is reported.
    pub samples: usize,
    /// Minimum duration of one batch.
    pub min_batch: Duration,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            state_sizes: vec![3, 6, 12, 24, 48],
            n_actions: 4,
            k: 30,
            horizon: 10,
            samples: 31,
            min_batch: Duration::from_millis(10),
            seed: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_states: usize,
    pub method: Method,
    pub median_seconds: f64,
}

/// TL-with-exploration: one scan of the ideal joint for `σ_max` and `ν₀`,
/// the similarity pass over the data, and one gated decision from the
/// posterior of the current state.
fn tl_first_rule(
    ideal: &IdealClosedLoopModel,
    data: &ClosedLoopRecord,
    cfg: &ExplorationConfig,
    rng: &mut impl Rng,
) -> Result<usize> {
    let space = ideal.space();
    let (min, max) = ideal.joint_extremes();
    if min <= 0.0 {
        return Err(FpdError::AllZeroIdeal);
    }
    let nu0 = min / space.n_states as f64;
    let weighted = data
        .triples()
        .map(|t| Ok((t, similarity(ideal, t)? / max)))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.m.min(weighted.len());
    let mean = (n > 0).then(|| {
        weighted[weighted.len() - n..]
            .iter()
            .map(|w| w.1)
            .sum::<f64>()
            / n as f64
    });
    let prev = data.last_state();
    let (action, _) = gated_choice(mean, space.n_actions, cfg, rng, || {
        Ok(learned_rule_from_data(space, &weighted, nu0, prev))
    })?;
    Ok(action)
}

/// FPD-learn: model estimate from the data, then the backward recursion.
fn fpd_learn_first_rule(
    ideal: &IdealClosedLoopModel,
    data: &ClosedLoopRecord,
    horizon: usize,
    kappa: f64,
) -> Result<f64> {
    let model = estimate_transition(data, kappa)?;
    let policy = solve_fpd(&model, ideal, horizon)?;
    Ok(policy.rule(1).prob(data.last_state(), 0))
}

fn calibrate<F: FnMut() -> Result<()>>(min_batch: Duration, f: &mut F) -> Result<usize> {
    let mut iters = 1usize;
    loop {
        if batch_seconds(iters, f)? * iters as f64 >= min_batch.as_secs_f64() || iters >= 1 << 24 {
            return Ok(iters);
        }
        iters *= 2;
    }
}

/// Mean seconds per call over one batch of `iters` calls.
fn batch_seconds<F: FnMut() -> Result<()>>(iters: usize, f: &mut F) -> Result<f64> {
    let start = Instant::now();
    for _ in 0..iters {
        f()?;
    }
    Ok(start.elapsed().as_secs_f64() / iters as f64)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Median per-call time of two computations. Their batches alternate so that
/// slow drifts in machine load affect both alike.
fn time_pair<F, G>(samples: usize, min_batch: Duration, mut f: F, mut g: G) -> Result<(f64, f64)>
where
    F: FnMut() -> Result<()>,
    G: FnMut() -> Result<()>,
{
    let fi = calibrate(min_batch, &mut f)?;
    let gi = calibrate(min_batch, &mut g)?;
    let n = samples.max(1);
    let (mut ft, mut gt) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        ft.push(batch_seconds(fi, &mut f)?);
        gt.push(batch_seconds(gi, &mut g)?);
    }
    Ok((median(ft), median(gt)))
}

pub fn bench_rule_time(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let explore = ExplorationConfig::default();
    let mut rows = Vec::new();
    for (i, &ns) in cfg.state_sizes.iter().enumerate() {
        let space = StateActionSpace::new(ns, cfg.n_actions)?;
        let run_id = i as u64;
        let system = generate_system(space, &mut substream(cfg.seed, run_id, Purpose::System))?;
        let ideal = preference_ideal(space, &[0])?;
        let data = generate_past_data(
            &system,
            &ideal,
            cfg.horizon,
            cfg.k,
            Rollout::First,
            &mut substream(cfg.seed, run_id, Purpose::PastData),
        )?;
        let kappa = 1.0 / ns as f64;

        let mut rng = substream(cfg.seed, run_id, Purpose::Adhoc(0));
        let (tl, fpd) = time_pair(
            cfg.samples,
            cfg.min_batch,
            || {
                black_box(tl_first_rule(
                    black_box(&ideal),
                    black_box(&data),
                    &explore,
                    &mut rng,
                )?);
                Ok(())
            },
            || {
                black_box(fpd_learn_first_rule(
                    black_box(&ideal),
                    black_box(&data),
                    cfg.horizon,
                    kappa,
                )?);
                Ok(())
            },
        )?;
        rows.push(BenchRow {
            n_states: ns,
            method: Method::TLexplore,
            median_seconds: tl,
        });
        rows.push(BenchRow {
            n_states: ns,
            method: Method::FPDlearn,
            median_seconds: fpd,
        });
    }
    Ok(rows)
}

/// `n_states,method,median_seconds` rows.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_states", "method", "median_seconds"])?;
    for r in rows {
        w.write_record([
            r.n_states.to_string(),
            r.method.to_string(),
            format!("{:e}", r.median_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_emits_two_rows_per_size() {
        let cfg = BenchConfig {
            state_sizes: vec![3, 5],
            samples: 3,
            min_batch: Duration::from_micros(200),
            ..Default::default()
        };
        let rows = bench_rule_time(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.median_seconds > 0.0));
        let mut buf = Vec::new();
        write_bench_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n_states,method,median_seconds\n3,TLexplore,"));
    }
}
