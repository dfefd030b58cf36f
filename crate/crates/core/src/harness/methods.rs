use std::time::Instant;

use crate::error::Result;
use crate::estimation::{estimate_transition, TransitionStats};
use crate::fpd::solve_fpd;
use crate::model::{
    simulate_closed_loop, ClosedLoopRecord, DecisionRule, IdealClosedLoopModel, Policy,
    PolicyRollout, RuleProvider, TransitionModel, Triple,
};
use crate::rng::SimRng;
use crate::similarity::{weigh_record, SimilarityMode, SimilarityScorer};
use crate::transfer::{default_prior, ExplorationConfig, TransferController, TransferStats};

use super::config::{ExperimentConfig, Method};
use super::experiment::RunResult;

/// Everything a method may look at in one repetition.
#[derive(Debug, Clone, Copy)]
pub struct MethodInputs<'a> {
    pub run_id: u64,
    pub system: &'a TransitionModel,
    pub current_ideal: &'a IdealClosedLoopModel,
    pub past_data: &'a ClosedLoopRecord,
    pub initial_state: usize,
}

/// FPD with a transition model re-estimated from every new observation and
/// re-planned before each decision.
struct OnlineFpd<'a> {
    stats: TransitionStats,
    ideal: &'a IdealClosedLoopModel,
    horizon: usize,
    policy: Policy,
}

impl RuleProvider for OnlineFpd<'_> {
    fn choose_action(
        &mut self,
        _epoch: usize,
        prev: usize,
        rng: &mut dyn rand::RngCore,
    ) -> Result<usize> {
        crate::model::sample_action(self.policy.rule(1), prev, rng)
    }

    fn observe(&mut self, triple: Triple) -> Result<()> {
        self.stats.observe(triple)?;
        self.policy = solve_fpd(&self.stats.posterior_mean()?, self.ideal, self.horizon)?;
        Ok(())
    }
}

fn transfer_controller<'a>(
    inputs: &MethodInputs<'a>,
    cfg: &ExperimentConfig,
    explore: bool,
) -> Result<TransferController<'a>> {
    let ideal = inputs.current_ideal;
    let nu0 = default_prior(ideal)?;
    let mut stats = TransferStats::new(ideal.space(), nu0, cfg.window_m)?;
    let weights = weigh_record(ideal, inputs.past_data, SimilarityMode::Normalized)?;
    for (t, &w) in inputs.past_data.triples().zip(&weights.omega) {
        stats.ingest(t, w)?;
    }
    let scorer = SimilarityScorer::new(ideal, SimilarityMode::Normalized)?;
    let exploration = if explore {
        Some(ExplorationConfig::new(
            cfg.epsilon,
            cfg.q_threshold,
            cfg.window_m,
        )?)
    } else {
        None
    };
    Ok(TransferController::new(stats, scorer, exploration).frozen(cfg.freeze_stats))
}

/// Runs one method for `cfg.h_current` epochs; gain counts visits to `s^1`.
pub fn run_method(
    method: Method,
    inputs: &MethodInputs<'_>,
    cfg: &ExperimentConfig,
    rng: &mut SimRng,
) -> Result<RunResult> {
    let system = inputs.system;
    let space = system.space();
    let h = cfg.h_current;
    let s0 = inputs.initial_state;
    let start = Instant::now();

    let (record, rule_time) = match method {
        Method::Rand => {
            let mut rule = DecisionRule::uniform(space);
            let t = start.elapsed();
            (simulate_closed_loop(system, &mut rule, s0, h, rng)?, t)
        }
        Method::TL | Method::TLexplore => {
            let mut ctl = transfer_controller(inputs, cfg, method == Method::TLexplore)?;
            let t = start.elapsed();
            (simulate_closed_loop(system, &mut ctl, s0, h, rng)?, t)
        }
        Method::FPDlearn if cfg.online_model_update => {
            let stats = TransitionStats::from_record(inputs.past_data, cfg.kappa())?;
            let policy = solve_fpd(&stats.posterior_mean()?, inputs.current_ideal, cfg.horizon)?;
            let mut ctl = OnlineFpd {
                stats,
                ideal: inputs.current_ideal,
                horizon: cfg.horizon,
                policy,
            };
            let t = start.elapsed();
            (simulate_closed_loop(system, &mut ctl, s0, h, rng)?, t)
        }
        Method::FPDlearn | Method::FPD => {
            let model = if method == Method::FPD {
                system.clone()
            } else {
                estimate_transition(inputs.past_data, cfg.kappa())?
            };
            let policy = solve_fpd(&model, inputs.current_ideal, cfg.horizon)?;
            let t = start.elapsed();
            let mut provider = PolicyRollout {
                policy: &policy,
                rollout: cfg.rollout_rule,
            };
            (simulate_closed_loop(system, &mut provider, s0, h, rng)?, t)
        }
    };

    Ok(RunResult {
        run_id: inputs.run_id,
        method,
        gain: record.visits(0),
        wall_time_rule: Some(rule_time.as_secs_f64()),
        trajectory: Some(record),
    })
}
