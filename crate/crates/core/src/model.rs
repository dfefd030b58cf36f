//! Finite decision problems: validated probability tables, trajectories and
//! seeded closed-loop simulation.
//!
//! Tables are stored flat in row-major order. A [`TransitionModel`] is indexed
//! `[prev_state][action][next_state]`, a [`DecisionRule`] `[prev_state][action]`.
//! Rows are checked against [`PROB_TOL`] on construction and divided by their
//! sum unless that sum is already within 1e-12 of one, so every table reachable
//! through the public API is normalized.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FpdError, Result};
use crate::rng::sample_categorical;

/// Tolerance on row sums accepted at construction.
pub const PROB_TOL: f64 = 1e-9;

/// Row sums closer to one than this are kept as entered. Rescaling brings a
/// row well inside this band, so constructing from stored values is a no-op.
const RESCALE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateActionSpace {
    pub n_states: usize,
    pub n_actions: usize,
}

impl StateActionSpace {
    pub fn new(n_states: usize, n_actions: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(FpdError::EmptySpace {
                n_states,
                n_actions,
            });
        }
        Ok(Self {
            n_states,
            n_actions,
        })
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s < self.n_states {
            Ok(())
        } else {
            Err(FpdError::IndexOutOfRange {
                kind: "state",
                index: s,
                size: self.n_states,
            })
        }
    }

    pub fn check_action(&self, a: usize) -> Result<()> {
        if a < self.n_actions {
            Ok(())
        } else {
            Err(FpdError::IndexOutOfRange {
                kind: "action",
                index: a,
                size: self.n_actions,
            })
        }
    }

    pub fn check_triple(&self, t: &Triple) -> Result<()> {
        self.check_state(t.prev)?;
        self.check_action(t.action)?;
        self.check_state(t.next)
    }
}

/// Checks one row and rescales it by its sum.
fn normalize_row(
    row: &mut [f64],
    what: &'static str,
    prev_state: usize,
    action: Option<usize>,
) -> Result<()> {
    let mut sum = 0.0;
    for &v in row.iter() {
        if !(0.0..=1.0 + PROB_TOL).contains(&v) {
            return Err(FpdError::NegativeEntry {
                what,
                prev_state,
                action,
                value: v,
            });
        }
        sum += v;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(FpdError::NonStochastic {
            what,
            prev_state,
            action,
            sum,
        });
    }
    if (sum - 1.0).abs() > RESCALE_TOL {
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(())
}

/// System dynamics p(s | a, s').
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    space: StateActionSpace,
    probs: Vec<f64>,
}

impl TransitionModel {
    /// Builds a model from a flat `[s'][a][s]` table.
    pub fn new(space: StateActionSpace, mut probs: Vec<f64>) -> Result<Self> {
        let (ns, na) = (space.n_states, space.n_actions);
        let expected = ns * na * ns;
        if probs.len() != expected {
            return Err(FpdError::ShapeMismatch {
                what: "transition model",
                expected,
                actual: probs.len(),
            });
        }
        for sp in 0..ns {
            for a in 0..na {
                let start = (sp * na + a) * ns;
                normalize_row(
                    &mut probs[start..start + ns],
                    "transition model",
                    sp,
                    Some(a),
                )?;
            }
        }
        Ok(Self { space, probs })
    }

    /// Validates a nested `[s'][a][s]` table.
    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let ns = nested.len();
        let na = nested.first().map_or(0, Vec::len);
        let space = StateActionSpace::new(ns, na)?;
        let mut flat = Vec::with_capacity(ns * na * ns);
        for plane in nested {
            if plane.len() != na {
                return Err(FpdError::ShapeMismatch {
                    what: "transition model actions",
                    expected: na,
                    actual: plane.len(),
                });
            }
            for row in plane {
                if row.len() != ns {
                    return Err(FpdError::ShapeMismatch {
                        what: "transition model next states",
                        expected: ns,
                        actual: row.len(),
                    });
                }
                flat.extend_from_slice(row);
            }
        }
        Self::new(space, flat)
    }

    /// Same next-state distribution for every (s', a).
    pub fn from_row(space: StateActionSpace, row: &[f64]) -> Result<Self> {
        let mut flat = Vec::with_capacity(space.n_states * space.n_actions * space.n_states);
        for _ in 0..space.n_states * space.n_actions {
            flat.extend_from_slice(row);
        }
        Self::new(space, flat)
    }

    pub fn space(&self) -> StateActionSpace {
        self.space
    }

    pub fn row(&self, prev: usize, action: usize) -> &[f64] {
        let ns = self.space.n_states;
        let start = (prev * self.space.n_actions + action) * ns;
        &self.probs[start..start + ns]
    }

    pub fn prob(&self, prev: usize, action: usize, next: usize) -> f64 {
        self.row(prev, action)[next]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.space.n_states)
            .map(|sp| {
                (0..self.space.n_actions)
                    .map(|a| self.row(sp, a).to_vec())
                    .collect()
            })
            .collect()
    }
}

/// Draws the next state from `model[prev][action][·]`.
pub fn sample_transition<R: Rng + ?Sized>(
    model: &TransitionModel,
    prev: usize,
    action: usize,
    rng: &mut R,
) -> Result<usize> {
    model.space.check_state(prev)?;
    model.space.check_action(action)?;
    Ok(sample_categorical(model.row(prev, action), rng))
}

/// Conditional distribution over actions given the previous state.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    space: StateActionSpace,
    probs: Vec<f64>,
}

impl DecisionRule {
    /// Builds a rule from a flat `[s'][a]` table.
    pub fn new(space: StateActionSpace, mut probs: Vec<f64>) -> Result<Self> {
        let (ns, na) = (space.n_states, space.n_actions);
        if probs.len() != ns * na {
            return Err(FpdError::ShapeMismatch {
                what: "decision rule",
                expected: ns * na,
                actual: probs.len(),
            });
        }
        for sp in 0..ns {
            normalize_row(
                &mut probs[sp * na..(sp + 1) * na],
                "decision rule",
                sp,
                None,
            )?;
        }
        Ok(Self { space, probs })
    }

    pub fn from_nested(nested: &[Vec<f64>], n_states: usize) -> Result<Self> {
        let na = nested.first().map_or(0, Vec::len);
        let space = StateActionSpace::new(n_states, na)?;
        if nested.len() != n_states {
            return Err(FpdError::ShapeMismatch {
                what: "decision rule states",
                expected: n_states,
                actual: nested.len(),
            });
        }
        let mut flat = Vec::with_capacity(n_states * na);
        for row in nested {
            if row.len() != na {
                return Err(FpdError::ShapeMismatch {
                    what: "decision rule actions",
                    expected: na,
                    actual: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::new(space, flat)
    }

    pub fn uniform(space: StateActionSpace) -> Self {
        let p = 1.0 / space.n_actions as f64;
        Self {
            space,
            probs: vec![p; space.n_states * space.n_actions],
        }
    }

    pub fn space(&self) -> StateActionSpace {
        self.space
    }

    pub fn row(&self, prev: usize) -> &[f64] {
        let na = self.space.n_actions;
        &self.probs[prev * na..(prev + 1) * na]
    }

    pub fn prob(&self, prev: usize, action: usize) -> f64 {
        self.row(prev)[action]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.space.n_states)
            .map(|s| self.row(s).to_vec())
            .collect()
    }
}

/// Draws an action from `rule[prev][·]`.
pub fn sample_action<R: Rng + ?Sized>(
    rule: &DecisionRule,
    prev: usize,
    rng: &mut R,
) -> Result<usize> {
    rule.space.check_state(prev)?;
    Ok(sample_categorical(rule.row(prev), rng))
}

/// Finite-horizon sequence of decision rules; `rules[t - 1]` acts at epoch `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    rules: Vec<DecisionRule>,
}

impl Policy {
    pub fn new(rules: Vec<DecisionRule>) -> Result<Self> {
        let first = rules.first().ok_or(FpdError::ZeroHorizon)?;
        let space = first.space();
        if let Some(bad) = rules.iter().find(|r| r.space() != space) {
            return Err(FpdError::ShapeMismatch {
                what: "policy rule",
                expected: space.n_states * space.n_actions,
                actual: bad.space().n_states * bad.space().n_actions,
            });
        }
        Ok(Self { rules })
    }

    pub fn stationary(rule: DecisionRule, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(FpdError::ZeroHorizon);
        }
        Self::new(vec![rule; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.rules.len()
    }

    pub fn space(&self) -> StateActionSpace {
        self.rules[0].space()
    }

    /// Rule for 1-based epoch `t`.
    pub fn rule(&self, t: usize) -> &DecisionRule {
        &self.rules[t - 1]
    }

    pub fn rules(&self) -> &[DecisionRule] {
        &self.rules
    }
}

/// Target closed-loop behaviour, factored into ideal dynamics and an ideal
/// decision rule.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealClosedLoopModel {
    transition: TransitionModel,
    rule: DecisionRule,
}

fn slice_extremes(xs: &[f64]) -> (f64, f64) {
    // entries are validated finite, so compare-and-select is exact and
    // lets the lanes vectorize
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    let chunks = xs.chunks_exact(4);
    let tail = chunks.remainder();
    for c in chunks {
        for i in 0..4 {
            lo[i] = if c[i] < lo[i] { c[i] } else { lo[i] };
            hi[i] = if c[i] > hi[i] { c[i] } else { hi[i] };
        }
    }
    for &x in tail {
        lo[0] = lo[0].min(x);
        hi[0] = hi[0].max(x);
    }
    (
        lo.into_iter().fold(f64::INFINITY, f64::min),
        hi.into_iter().fold(f64::NEG_INFINITY, f64::max),
    )
}

impl IdealClosedLoopModel {
    pub fn new(transition: TransitionModel, rule: DecisionRule) -> Result<Self> {
        if transition.space() != rule.space() {
            return Err(FpdError::ShapeMismatch {
                what: "ideal rule",
                expected: transition.space().n_states * transition.space().n_actions,
                actual: rule.space().n_states * rule.space().n_actions,
            });
        }
        Ok(Self { transition, rule })
    }

    pub fn space(&self) -> StateActionSpace {
        self.transition.space()
    }

    pub fn transition(&self) -> &TransitionModel {
        &self.transition
    }

    pub fn rule(&self) -> &DecisionRule {
        &self.rule
    }

    /// ⁱp(next, action | prev).
    pub fn joint(&self, prev: usize, action: usize, next: usize) -> f64 {
        self.transition.prob(prev, action, next) * self.rule.prob(prev, action)
    }

    /// Smallest and largest value of the joint over all cells, in one pass.
    pub fn joint_extremes(&self) -> (f64, f64) {
        let ns = self.space().n_states;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        // rule entries are nonnegative, so they scale row extremes directly
        for (row, &pa) in self
            .transition
            .as_flat()
            .chunks_exact(ns)
            .zip(self.rule.as_flat())
        {
            let (lo, hi) = slice_extremes(row);
            min = min.min(pa * lo);
            max = max.max(pa * hi);
        }
        (min, max)
    }

    /// Iterates every `(prev, action, next)` cell of the joint.
    pub fn joint_cells(&self) -> impl Iterator<Item = (Triple, f64)> + '_ {
        let StateActionSpace {
            n_states,
            n_actions,
        } = self.space();
        (0..n_states).flat_map(move |prev| {
            (0..n_actions).flat_map(move |action| {
                (0..n_states).map(move |next| {
                    let t = Triple { prev, action, next };
                    (t, self.joint(prev, action, next))
                })
            })
        })
    }
}

/// One observed transition `(s_{τ-1}, a_τ, s_τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub prev: usize,
    pub action: usize,
    pub next: usize,
}

impl Triple {
    pub fn new(prev: usize, action: usize, next: usize) -> Self {
        Self { prev, action, next }
    }
}

/// Trajectory of a closed loop: an initial state followed by
/// `(action, next_state)` steps. Chain consistency holds by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedLoopRecord {
    space: StateActionSpace,
    initial_state: usize,
    steps: Vec<(usize, usize)>,
}

impl ClosedLoopRecord {
    pub fn new(space: StateActionSpace, initial_state: usize) -> Result<Self> {
        space.check_state(initial_state)?;
        Ok(Self {
            space,
            initial_state,
            steps: Vec::new(),
        })
    }

    pub fn from_steps(
        space: StateActionSpace,
        initial_state: usize,
        steps: &[(usize, usize)],
    ) -> Result<Self> {
        let mut rec = Self::new(space, initial_state)?;
        for &(a, s) in steps {
            rec.push(a, s)?;
        }
        Ok(rec)
    }

    /// Rebuilds a record from explicit triples, rejecting broken chains.
    pub fn from_triples(space: StateActionSpace, triples: &[Triple]) -> Result<Self> {
        let first = triples.first().ok_or(FpdError::EmptyRecord)?;
        let mut rec = Self::new(space, first.prev)?;
        for (i, t) in triples.iter().enumerate() {
            if t.prev != rec.last_state() {
                return Err(FpdError::BrokenChain { step: i + 1 });
            }
            rec.push(t.action, t.next)?;
        }
        Ok(rec)
    }

    pub fn push(&mut self, action: usize, next_state: usize) -> Result<()> {
        self.space.check_action(action)?;
        self.space.check_state(next_state)?;
        self.steps.push((action, next_state));
        Ok(())
    }

    pub fn space(&self) -> StateActionSpace {
        self.space
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_state(&self) -> usize {
        self.steps.last().map_or(self.initial_state, |&(_, s)| s)
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        let prevs = std::iter::once(self.initial_state).chain(self.steps.iter().map(|&(_, s)| s));
        prevs
            .zip(self.steps.iter())
            .map(|(prev, &(action, next))| Triple { prev, action, next })
    }

    /// Number of visits to `state` over `s_1..s_k` (the initial state is not counted).
    pub fn visits(&self, state: usize) -> usize {
        self.steps.iter().filter(|&&(_, s)| s == state).count()
    }
}

/// Supplies actions to a closed-loop simulation, one epoch at a time.
///
/// `observe` is called with each realised transition, which lets adaptive
/// controllers update their statistics between decisions.
pub trait RuleProvider {
    fn choose_action(
        &mut self,
        epoch: usize,
        prev: usize,
        rng: &mut dyn rand::RngCore,
    ) -> Result<usize>;

    fn observe(&mut self, _triple: Triple) -> Result<()> {
        Ok(())
    }
}

impl RuleProvider for DecisionRule {
    fn choose_action(
        &mut self,
        _epoch: usize,
        prev: usize,
        rng: &mut dyn rand::RngCore,
    ) -> Result<usize> {
        sample_action(self, prev, rng)
    }
}

/// How a finite-horizon policy is applied beyond its horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rollout {
    /// Epochs `1..=H` use their own rule; later epochs reuse the epoch-1 rule.
    #[default]
    First,
    /// Epoch `t` uses rule `((t - 1) mod H) + 1`.
    Cycle,
}

impl Rollout {
    pub fn epoch_rule(self, epoch: usize, horizon: usize) -> usize {
        match self {
            Rollout::First if epoch <= horizon => epoch,
            Rollout::First => 1,
            Rollout::Cycle => (epoch - 1) % horizon + 1,
        }
    }
}

impl std::str::FromStr for Rollout {
    type Err = FpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Rollout::First),
            "cycle" => Ok(Rollout::Cycle),
            other => Err(FpdError::Format(format!("unknown rollout rule {other:?}"))),
        }
    }
}

/// A [`Policy`] played out with a [`Rollout`] convention.
#[derive(Debug, Clone)]
pub struct PolicyRollout<'a> {
    pub policy: &'a Policy,
    pub rollout: Rollout,
}

impl RuleProvider for PolicyRollout<'_> {
    fn choose_action(
        &mut self,
        epoch: usize,
        prev: usize,
        rng: &mut dyn rand::RngCore,
    ) -> Result<usize> {
        let t = self.rollout.epoch_rule(epoch, self.policy.horizon());
        sample_action(self.policy.rule(t), prev, rng)
    }
}

/// Simulates `n_epochs` steps of the closed loop, sampling the action first
/// and then the next state at every epoch.
pub fn simulate_closed_loop<P, R>(
    model: &TransitionModel,
    provider: &mut P,
    initial_state: usize,
    n_epochs: usize,
    rng: &mut R,
) -> Result<ClosedLoopRecord>
where
    P: RuleProvider + ?Sized,
    R: rand::RngCore,
{
    let mut record = ClosedLoopRecord::new(model.space(), initial_state)?;
    let mut prev = initial_state;
    for epoch in 1..=n_epochs {
        let action = provider.choose_action(epoch, prev, rng)?;
        let next = sample_transition(model, prev, action, rng)?;
        record.push(action, next)?;
        provider.observe(Triple { prev, action, next })?;
        prev = next;
    }
    Ok(record)
}
