//! Similarity-weighted Bayesian learning of a decision rule.
//!
//! The unknown closed-loop model `θ_{s,a|s'} = p(s, a | s')` gets a product of
//! Dirichlet priors with a symmetric pseudo-count `ν₀`. Under the weighted Bayes
//! rule every observed triple contributes its similarity `ω` to one
//! concentration parameter:
//!
//! ```text
//! V_τ[s][a][s'] = V_{τ−1}[s][a][s'] + ω_τ · δ(s, s_τ) δ(a, a_τ) δ(s', s_{τ−1}),   V_0 ≡ ν₀
//! ```
//!
//! and the learned rule is the posterior-mean marginal over the next state,
//! `p̂(a | s') = Σ_s V[s][a][s'] / Σ_{s,a} V[s][a][s']`.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;

use crate::error::{FpdError, Result};
use crate::model::{DecisionRule, IdealClosedLoopModel, RuleProvider, StateActionSpace, Triple};
use crate::rng::sample_categorical;
use crate::similarity::SimilarityScorer;

/// `ν₀ = min ⁱp(s, a | s') / |S|`.
pub fn default_prior(ideal: &IdealClosedLoopModel) -> Result<f64> {
    let (min, _) = ideal.joint_extremes();
    if min > 0.0 {
        Ok(min / ideal.space().n_states as f64)
    } else {
        Err(FpdError::AllZeroIdeal)
    }
}

fn check_weight(omega: f64) -> Result<()> {
    if (0.0..=1.0).contains(&omega) {
        Ok(())
    } else {
        Err(FpdError::OutOfRange {
            name: "omega",
            value: omega,
            range: "[0, 1]",
        })
    }
}

/// Dirichlet concentration tensor plus the window of recent similarities.
#[derive(Debug, Clone)]
pub struct TransferStats {
    space: StateActionSpace,
    nu0: f64,
    /// `v[(s * |A| + a) * |S| + s']`.
    v: Vec<f64>,
    window: VecDeque<f64>,
    window_capacity: usize,
    total_weight: f64,
}

impl TransferStats {
    pub fn new(space: StateActionSpace, nu0: f64, window_capacity: usize) -> Result<Self> {
        if !(nu0 > 0.0 && nu0.is_finite()) {
            return Err(FpdError::OutOfRange {
                name: "nu0",
                value: nu0,
                range: "(0, inf)",
            });
        }
        if window_capacity == 0 {
            return Err(FpdError::OutOfRange {
                name: "window length",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        Ok(Self {
            space,
            nu0,
            v: vec![nu0; space.n_states * space.n_actions * space.n_states],
            window: VecDeque::with_capacity(window_capacity),
            window_capacity,
            total_weight: 0.0,
        })
    }

    pub fn space(&self) -> StateActionSpace {
        self.space
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    fn idx(&self, next: usize, action: usize, prev: usize) -> usize {
        (next * self.space.n_actions + action) * self.space.n_states + prev
    }

    /// Concentration parameter `V[next][action][prev]`.
    pub fn v(&self, next: usize, action: usize, prev: usize) -> f64 {
        self.v[self.idx(next, action, prev)]
    }

    /// Sum of all ingested weights.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Adds `omega` to the cell of `triple` and records it in the window.
    pub fn ingest(&mut self, triple: Triple, omega: f64) -> Result<()> {
        self.space.check_triple(&triple)?;
        check_weight(omega)?;
        let i = self.idx(triple.next, triple.action, triple.prev);
        self.v[i] += omega;
        self.total_weight += omega;
        if self.window.len() == self.window_capacity {
            self.window.pop_front();
        }
        self.window.push_back(omega);
        Ok(())
    }

    pub fn window(&self) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    /// Mean of the last `m` recorded similarities (fewer if fewer exist);
    /// `None` with no history.
    pub fn window_mean(&self, m: usize) -> Option<f64> {
        let n = m.min(self.window.len());
        if n == 0 {
            return None;
        }
        let sum: f64 = self.window.iter().rev().take(n).sum();
        Some(sum / n as f64)
    }

    /// Learned distribution over actions in state `prev`.
    pub fn learned_rule(&self, prev: usize) -> Result<Vec<f64>> {
        self.space.check_state(prev)?;
        let (ns, na) = (self.space.n_states, self.space.n_actions);
        let mut num: Vec<f64> = (0..na)
            .map(|a| (0..ns).map(|s| self.v(s, a, prev)).sum())
            .collect();
        let den: f64 = num.iter().sum();
        num.iter_mut().for_each(|x| *x /= den);
        Ok(num)
    }

    /// Learned rule for every state.
    pub fn learned_decision_rule(&self) -> Result<DecisionRule> {
        let mut flat = Vec::with_capacity(self.space.n_states * self.space.n_actions);
        for prev in 0..self.space.n_states {
            flat.extend(self.learned_rule(prev)?);
        }
        DecisionRule::new(self.space, flat)
    }

    /// Dumps `V` as `next,action,prev,v` rows.
    pub fn write_v_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["next", "action", "prev", "v"])?;
        let (ns, na) = (self.space.n_states, self.space.n_actions);
        for s in 0..ns {
            for a in 0..na {
                for sp in 0..ns {
                    w.write_record([
                        s.to_string(),
                        a.to_string(),
                        sp.to_string(),
                        self.v(s, a, sp).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Dumps the similarity window, oldest first.
    pub fn write_window_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega"])?;
        for v in &self.window {
            w.write_record([v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-previous-state Dirichlet parameters of the weighted-Bayes posterior,
/// built in one pass over the data.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPosterior {
    space: StateActionSpace,
    /// `params[s'][s * |A| + a]`.
    params: Vec<Vec<f64>>,
}

impl DirichletPosterior {
    pub fn param(&self, next: usize, action: usize, prev: usize) -> f64 {
        self.params[prev][next * self.space.n_actions + action]
    }

    /// Parameters of the Dirichlet over `(s, a)` given `prev`.
    pub fn for_prev(&self, prev: usize) -> &[f64] {
        &self.params[prev]
    }
}

/// Closed-form weighted posterior for `data` under the symmetric prior `nu0`.
pub fn posterior_check(
    space: StateActionSpace,
    data: &[(Triple, f64)],
    nu0: f64,
) -> Result<DirichletPosterior> {
    let (ns, na) = (space.n_states, space.n_actions);
    let mut params = vec![vec![nu0; ns * na]; ns];
    for &(t, omega) in data {
        space.check_triple(&t)?;
        if omega.is_nan() || omega < 0.0 {
            return Err(FpdError::OutOfRange {
                name: "omega",
                value: omega,
                range: "[0, inf)",
            });
        }
        params[t.prev][t.next * na + t.action] += omega;
    }
    Ok(DirichletPosterior { space, params })
}

/// Learned rule evaluated straight from the weighted data, without the
/// concentration tensor:
///
/// `(Σ_τ ω_τ δ(a, a_τ) δ(s', s_{τ−1}) + |S| ν₀) / (Σ_τ ω_τ δ(s', s_{τ−1}) + |S| |A| ν₀)`.
pub fn learned_rule_from_data(
    space: StateActionSpace,
    data: &[(Triple, f64)],
    nu0: f64,
    prev: usize,
) -> Vec<f64> {
    let (ns, na) = (space.n_states as f64, space.n_actions);
    let mut num = vec![0.0; na];
    let mut den = 0.0;
    for &(t, omega) in data {
        if t.prev == prev {
            num[t.action] += omega;
            den += omega;
        }
    }
    let den = den + ns * na as f64 * nu0;
    num.iter().map(|&n| (n + ns * nu0) / den).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationConfig {
    pub epsilon: f64,
    pub q: f64,
    pub m: usize,
}

impl ExplorationConfig {
    pub fn new(epsilon: f64, q: f64, m: usize) -> Result<Self> {
        for (name, value) in [("epsilon", epsilon), ("q", q)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FpdError::OutOfRange {
                    name,
                    value,
                    range: "[0, 1]",
                });
            }
        }
        if m == 0 {
            return Err(FpdError::OutOfRange {
                name: "m",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        Ok(Self { epsilon, q, m })
    }
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            q: 0.4,
            m: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleUsed {
    Learned,
    Uniform,
}

/// One ε-greedy decision gated on the recent-similarity mean.
///
/// Exploration is only possible when the mean of the last `m` similarities is
/// below `q`; with an empty window the gate is open.
pub fn act<R: Rng + ?Sized>(
    stats: &TransferStats,
    prev: usize,
    cfg: &ExplorationConfig,
    rng: &mut R,
) -> Result<(usize, RuleUsed)> {
    stats.space.check_state(prev)?;
    gated_choice(
        stats.window_mean(cfg.m),
        stats.space.n_actions,
        cfg,
        rng,
        || stats.learned_rule(prev),
    )
}

/// The exploration gate on its own: `window_mean` is the mean of the recent
/// similarities (`None` without history) and `learned` yields the rule to
/// sample when the gate does not force a uniform action.
pub fn gated_choice<R, F>(
    window_mean: Option<f64>,
    n_actions: usize,
    cfg: &ExplorationConfig,
    rng: &mut R,
    learned: F,
) -> Result<(usize, RuleUsed)>
where
    R: Rng + ?Sized,
    F: FnOnce() -> Result<Vec<f64>>,
{
    if window_mean.is_none_or(|mean| mean < cfg.q) {
        let xi: f64 = rng.random();
        if xi < cfg.epsilon {
            return Ok((rng.random_range(0..n_actions), RuleUsed::Uniform));
        }
    }
    let rule = learned()?;
    Ok((sample_categorical(&rule, rng), RuleUsed::Learned))
}

/// Scores a newly observed triple against the current ideal and ingests it.
/// Returns the weight used.
pub fn after_step(
    stats: &mut TransferStats,
    triple: Triple,
    scorer: &SimilarityScorer<'_>,
) -> Result<f64> {
    let omega = scorer.score(triple)?;
    stats.ingest(triple, omega)?;
    Ok(omega)
}

/// Transfer-learning decision maker for closed-loop simulation.
///
/// Without an [`ExplorationConfig`] it always samples the learned rule; with
/// one it follows the gated ε-greedy scheme of [`act`].
#[derive(Debug, Clone)]
pub struct TransferController<'a> {
    pub stats: TransferStats,
    scorer: SimilarityScorer<'a>,
    exploration: Option<ExplorationConfig>,
    frozen: bool,
    uniform_decisions: usize,
}

impl<'a> TransferController<'a> {
    pub fn new(
        stats: TransferStats,
        scorer: SimilarityScorer<'a>,
        exploration: Option<ExplorationConfig>,
    ) -> Self {
        Self {
            stats,
            scorer,
            exploration,
            frozen: false,
            uniform_decisions: 0,
        }
    }

    /// Stops online updates after each observed transition.
    pub fn frozen(mut self, frozen: bool) -> Self {
        self.frozen = frozen;
        self
    }

    /// Number of decisions taken from the uniform rule.
    pub fn uniform_decisions(&self) -> usize {
        self.uniform_decisions
    }
}

impl RuleProvider for TransferController<'_> {
    fn choose_action(
        &mut self,
        _epoch: usize,
        prev: usize,
        rng: &mut dyn rand::RngCore,
    ) -> Result<usize> {
        match &self.exploration {
            Some(cfg) => {
                let (a, used) = act(&self.stats, prev, cfg, rng)?;
                if used == RuleUsed::Uniform {
                    self.uniform_decisions += 1;
                }
                Ok(a)
            }
            None => Ok(sample_categorical(&self.stats.learned_rule(prev)?, rng)),
        }
    }

    fn observe(&mut self, triple: Triple) -> Result<()> {
        if !self.frozen {
            after_step(&mut self.stats, triple, &self.scorer)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TransitionModel;
    use crate::rng::seeded;
    use crate::similarity::SimilarityMode;

    fn space() -> StateActionSpace {
        StateActionSpace::new(3, 4).unwrap()
    }

    fn current_ideal() -> IdealClosedLoopModel {
        IdealClosedLoopModel::new(
            TransitionModel::from_row(space(), &[0.99998, 0.00001, 0.00001]).unwrap(),
            DecisionRule::uniform(space()),
        )
        .unwrap()
    }

    #[test]
    fn prior_from_current_ideal() {
        let nu0 = default_prior(&current_ideal()).unwrap();
        assert!((nu0 - 0.00001 * 0.25 / 3.0).abs() < 1e-20);
        assert!((nu0 - 8.3333e-7).abs() < 1e-10);
    }

    #[test]
    fn prior_from_uniform_joint() {
        let ideal = IdealClosedLoopModel::new(
            TransitionModel::from_row(space(), &[1.0 / 3.0; 3]).unwrap(),
            DecisionRule::uniform(space()),
        )
        .unwrap();
        let nu0 = default_prior(&ideal).unwrap();
        assert!((nu0 - 1.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn prior_rejects_zero_cell() {
        let ideal = IdealClosedLoopModel::new(
            TransitionModel::from_row(space(), &[1.0, 0.0, 0.0]).unwrap(),
            DecisionRule::uniform(space()),
        )
        .unwrap();
        assert_eq!(default_prior(&ideal).unwrap_err(), FpdError::AllZeroIdeal);
    }

    #[test]
    fn zero_weight_only_touches_window() {
        let mut st = TransferStats::new(space(), 0.1, 4).unwrap();
        let before = st.clone();
        st.ingest(Triple::new(0, 1, 2), 0.0).unwrap();
        assert_eq!(st.v, before.v);
        assert_eq!(st.window().collect::<Vec<_>>(), vec![0.0]);
    }

    #[test]
    fn unit_weight_on_empty_stats() {
        let mut st = TransferStats::new(space(), 0.1, 4).unwrap();
        st.ingest(Triple::new(2, 1, 0), 1.0).unwrap();
        assert_eq!(st.v(0, 1, 2), 1.1);
    }

    #[test]
    fn weight_outside_unit_interval_rejected() {
        let mut st = TransferStats::new(space(), 0.1, 4).unwrap();
        assert!(st.ingest(Triple::new(0, 0, 0), 1.5).is_err());
        assert!(st.ingest(Triple::new(0, 0, 0), -0.1).is_err());
        assert!(st.ingest(Triple::new(0, 0, 0), f64::NAN).is_err());
    }

    #[test]
    fn uniform_without_data() {
        let st = TransferStats::new(space(), 8.3e-7, 10).unwrap();
        for s in 0..3 {
            assert!(st.learned_rule(s).unwrap().iter().all(|&p| p == 0.25));
        }
    }

    #[test]
    fn single_ingest_rule_value() {
        let nu0 = default_prior(&current_ideal()).unwrap();
        let mut st = TransferStats::new(space(), nu0, 10).unwrap();
        st.ingest(Triple::new(2, 1, 0), 1.0).unwrap();
        let rule = st.learned_rule(2).unwrap();
        let expected = (1.0 + 3.0 * nu0) / (1.0 + 12.0 * nu0);
        assert!((rule[1] - expected).abs() < 1e-15);
        assert!((rule[1] - 0.999993).abs() < 1e-6);
    }

    #[test]
    fn duplicate_half_weights_equal_one_full_weight() {
        let t = Triple::new(1, 3, 0);
        let a = posterior_check(space(), &[(t, 0.5), (t, 0.5)], 0.01).unwrap();
        let b = posterior_check(space(), &[(t, 1.0)], 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_posterior_is_prior() {
        let p = posterior_check(space(), &[], 0.2).unwrap();
        for s in 0..3 {
            assert!(p.for_prev(s).iter().all(|&v| v == 0.2));
        }
    }

    #[test]
    fn window_mean_warmup_and_capacity() {
        let mut st = TransferStats::new(space(), 0.1, 3).unwrap();
        assert_eq!(st.window_mean(3), None);
        st.ingest(Triple::new(0, 0, 0), 1.0).unwrap();
        assert_eq!(st.window_mean(3), Some(1.0));
        for _ in 0..3 {
            st.ingest(Triple::new(0, 0, 1), 0.0).unwrap();
        }
        assert_eq!(st.window_mean(3), Some(0.0));
        assert_eq!(st.window().count(), 3);
    }

    #[test]
    fn exploration_config_ranges() {
        assert!(ExplorationConfig::new(1.5, 0.4, 10).is_err());
        assert!(ExplorationConfig::new(0.3, -0.1, 10).is_err());
        assert!(ExplorationConfig::new(0.3, 0.4, 0).is_err());
        assert!(ExplorationConfig::new(0.3, 0.4, 10).is_ok());
    }

    fn stats_with_window(value: f64) -> TransferStats {
        let mut st = TransferStats::new(space(), 0.01, 10).unwrap();
        for _ in 0..10 {
            st.ingest(Triple::new(0, 0, 0), value).unwrap();
        }
        st
    }

    #[test]
    fn closed_gate_uses_learned_rule() {
        let st = stats_with_window(0.9);
        let cfg = ExplorationConfig::new(1.0, 0.4, 10).unwrap();
        let mut rng = seeded(4);
        for _ in 0..1000 {
            assert_eq!(act(&st, 0, &cfg, &mut rng).unwrap().1, RuleUsed::Learned);
        }
    }

    #[test]
    fn forced_exploration() {
        let st = stats_with_window(0.1);
        let cfg = ExplorationConfig::new(1.0, 0.4, 10).unwrap();
        let mut rng = seeded(4);
        for _ in 0..1000 {
            assert_eq!(act(&st, 0, &cfg, &mut rng).unwrap().1, RuleUsed::Uniform);
        }
    }

    #[test]
    fn exploration_frequency() {
        let st = stats_with_window(0.1);
        let cfg = ExplorationConfig::new(0.3, 0.4, 10).unwrap();
        let mut rng = seeded(8);
        let n = 100_000;
        let uniform = (0..n)
            .filter(|_| act(&st, 1, &cfg, &mut rng).unwrap().1 == RuleUsed::Uniform)
            .count();
        let f = uniform as f64 / n as f64;
        assert!((f - 0.3).abs() < 0.01, "freq {f}");
    }

    #[test]
    fn empty_window_gate_is_open() {
        let st = TransferStats::new(space(), 0.01, 10).unwrap();
        let cfg = ExplorationConfig::new(1.0, 0.4, 10).unwrap();
        assert_eq!(
            act(&st, 0, &cfg, &mut seeded(1)).unwrap().1,
            RuleUsed::Uniform
        );
    }

    #[test]
    fn after_step_window_behaviour() {
        let ideal = current_ideal();
        let scorer = SimilarityScorer::new(&ideal, SimilarityMode::Normalized).unwrap();
        let mut st = TransferStats::new(space(), 0.01, 4).unwrap();
        let w = after_step(&mut st, Triple::new(1, 2, 0), &scorer).unwrap();
        assert_eq!(w, 1.0);
        assert_eq!(st.window_mean(4), Some(1.0));

        // unwanted landings push the mean towards zero; exact zeros need a zero ideal cell
        let mut st = TransferStats::new(space(), 0.01, 4).unwrap();
        for _ in 0..6 {
            st.ingest(Triple::new(0, 0, 2), 0.0).unwrap();
        }
        assert_eq!(st.window_mean(4), Some(0.0));
        let cfg = ExplorationConfig::new(1.0, 0.4, 4).unwrap();
        assert_eq!(
            act(&st, 0, &cfg, &mut seeded(2)).unwrap().1,
            RuleUsed::Uniform
        );
    }

    #[test]
    fn csv_dumps() {
        let mut st = TransferStats::new(StateActionSpace::new(2, 1).unwrap(), 0.5, 2).unwrap();
        st.ingest(Triple::new(0, 0, 1), 1.0).unwrap();
        let mut buf = Vec::new();
        st.write_v_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("1,0,0,1.5"));
        let mut buf = Vec::new();
        st.write_window_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "omega\n1\n");
    }
}
