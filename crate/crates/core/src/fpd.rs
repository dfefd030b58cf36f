//! Fully probabilistic design over a finite horizon.
//!
//! The optimal rule at epoch `t` is
//!
//! ```text
//! p_t(a | s') = ⁱp(a | s') · exp(−α(a, s') − β_t(a, s')) / γ_{t−1}(s')
//! α(a, s')    = Σ_s p(s | a, s') ln( p(s | a, s') / ⁱp(s | a, s') )
//! β_t(a, s')  = −Σ_s p(s | a, s') ln γ_t(s)
//! γ_{t−1}(s') = Σ_a ⁱp(a | s') · exp(−α(a, s') − β_t(a, s'))
//! ```
//!
//! with `γ_H ≡ 1`. Everything is evaluated in log space: the ideal models used
//! in practice put 1e-5 on unwanted states, so `ln γ` reaches −100 and below
//! over a ten-step horizon.

use crate::error::{FpdError, Result};
use crate::model::{DecisionRule, IdealClosedLoopModel, Policy, StateActionSpace, TransitionModel};

/// Intermediate quantities of the backward recursion.
#[derive(Debug, Clone)]
pub struct FpdWorkspace {
    space: StateActionSpace,
    horizon: usize,
    /// `α[s' * |A| + a]`; the models are time invariant so α is shared by all epochs.
    alpha: Vec<f64>,
    /// `beta[t - 1][s' * |A| + a]` for epochs `t = 1..=H`.
    beta: Vec<Vec<f64>>,
    /// `log_gamma[t][s]` for `t = 0..=H`; `log_gamma[H] ≡ 0`.
    log_gamma: Vec<Vec<f64>>,
}

impl FpdWorkspace {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn alpha(&self, prev: usize, action: usize) -> f64 {
        self.alpha[prev * self.space.n_actions + action]
    }

    /// β used by the rule of 1-based epoch `t`.
    pub fn beta(&self, t: usize, prev: usize, action: usize) -> f64 {
        self.beta[t - 1][prev * self.space.n_actions + action]
    }

    /// `ln γ_t(s)`, `t = 0..=H`.
    pub fn log_gamma(&self, t: usize, state: usize) -> f64 {
        self.log_gamma[t][state]
    }

    pub fn gamma(&self, t: usize, state: usize) -> f64 {
        self.log_gamma(t, state).exp()
    }
}

fn check_shapes(problem: &TransitionModel, ideal: &IdealClosedLoopModel) -> Result<()> {
    if problem.space() != ideal.space() {
        let (p, i) = (problem.space(), ideal.space());
        return Err(FpdError::ShapeMismatch {
            what: "ideal model",
            expected: p.n_states * p.n_actions * p.n_states,
            actual: i.n_states * i.n_actions * i.n_states,
        });
    }
    Ok(())
}

/// `Σ_s p ln(p / q)` with `0 ln(0/q) = 0` and `p ln(p/0) = +∞`.
fn kl_row(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc
}

/// Optimal FPD policy of length `horizon`.
pub fn solve_fpd(
    problem: &TransitionModel,
    ideal: &IdealClosedLoopModel,
    horizon: usize,
) -> Result<Policy> {
    solve_fpd_with_workspace(problem, ideal, horizon).map(|(p, _)| p)
}

pub fn solve_fpd_with_workspace(
    problem: &TransitionModel,
    ideal: &IdealClosedLoopModel,
    horizon: usize,
) -> Result<(Policy, FpdWorkspace)> {
    if horizon == 0 {
        return Err(FpdError::ZeroHorizon);
    }
    check_shapes(problem, ideal)?;
    let space = problem.space();
    let (ns, na) = (space.n_states, space.n_actions);

    let mut alpha = vec![0.0; ns * na];
    for sp in 0..ns {
        for a in 0..na {
            alpha[sp * na + a] = kl_row(problem.row(sp, a), ideal.transition().row(sp, a));
        }
    }

    let mut log_gamma = vec![vec![0.0; ns]; horizon + 1];
    let mut beta = vec![vec![0.0; ns * na]; horizon];
    let mut rules: Vec<DecisionRule> = Vec::with_capacity(horizon);
    let mut log_w = vec![0.0; na];
    let mut probs = vec![0.0; ns * na];

    for t in (1..=horizon).rev() {
        let (head, tail) = log_gamma.split_at_mut(t);
        let next_lg = &tail[0];
        let cur_lg = &mut head[t - 1];
        for sp in 0..ns {
            let ideal_row = ideal.rule().row(sp);
            let mut max = f64::NEG_INFINITY;
            for a in 0..na {
                let b = -problem
                    .row(sp, a)
                    .iter()
                    .zip(next_lg)
                    .map(|(&p, &lg)| if p > 0.0 { p * lg } else { 0.0 })
                    .sum::<f64>();
                beta[t - 1][sp * na + a] = b;
                let al = alpha[sp * na + a];
                log_w[a] = if ideal_row[a] > 0.0 && al.is_finite() {
                    ideal_row[a].ln() - al - b
                } else {
                    f64::NEG_INFINITY
                };
                max = max.max(log_w[a]);
            }
            if max == f64::NEG_INFINITY {
                return Err(FpdError::DegenerateIdeal { state: sp });
            }
            let sum: f64 = log_w.iter().map(|&lw| (lw - max).exp()).sum();
            cur_lg[sp] = max + sum.ln();
            for a in 0..na {
                probs[sp * na + a] = (log_w[a] - max).exp() / sum;
            }
        }
        rules.push(DecisionRule::new(space, probs.clone())?);
    }
    rules.reverse();

    let ws = FpdWorkspace {
        space,
        horizon,
        alpha,
        beta,
        log_gamma,
    };
    Ok((Policy::new(rules)?, ws))
}

fn check_initial(space: StateActionSpace, p0: &[f64]) -> Result<()> {
    if p0.len() != space.n_states {
        return Err(FpdError::ShapeMismatch {
            what: "initial distribution",
            expected: space.n_states,
            actual: p0.len(),
        });
    }
    let sum: f64 = p0.iter().sum();
    if p0.iter().any(|&p| p.is_nan() || p < 0.0) || (sum - 1.0).abs() > crate::model::PROB_TOL {
        return Err(FpdError::NonStochastic {
            what: "initial distribution",
            prev_state: 0,
            action: None,
            sum,
        });
    }
    Ok(())
}

/// Exact KL divergence between the trajectory distributions of the actual
/// closed loop (`problem` driven by `policy`) and the ideal one, both started
/// from `p0`, over the policy horizon. Computed by forward propagation of the
/// state marginal; `+∞` when the actual loop reaches a cell the ideal forbids.
pub fn kl_closed_loop(
    problem: &TransitionModel,
    policy: &Policy,
    ideal: &IdealClosedLoopModel,
    p0: &[f64],
) -> Result<f64> {
    check_shapes(problem, ideal)?;
    let space = problem.space();
    if policy.space() != space {
        return Err(FpdError::ShapeMismatch {
            what: "policy",
            expected: space.n_states * space.n_actions,
            actual: policy.space().n_states * policy.space().n_actions,
        });
    }
    check_initial(space, p0)?;
    let (ns, na) = (space.n_states, space.n_actions);

    let mut marginal = p0.to_vec();
    let mut next = vec![0.0; ns];
    let mut kl = 0.0;
    for t in 1..=policy.horizon() {
        let rule = policy.rule(t);
        next.iter_mut().for_each(|v| *v = 0.0);
        for sp in 0..ns {
            let w = marginal[sp];
            if w <= 0.0 {
                continue;
            }
            for a in 0..na {
                let pa = rule.prob(sp, a);
                if pa <= 0.0 {
                    continue;
                }
                for s in 0..ns {
                    let joint = problem.prob(sp, a, s) * pa;
                    if joint <= 0.0 {
                        continue;
                    }
                    let ideal_joint = ideal.joint(sp, a, s);
                    if ideal_joint <= 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    kl += w * joint * (joint / ideal_joint).ln();
                    next[s] += w * joint;
                }
            }
        }
        std::mem::swap(&mut marginal, &mut next);
    }
    Ok(kl.max(0.0))
}

/// Per-transition reward under which an MDP is equivalent to the FPD problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTensor {
    space: StateActionSpace,
    /// `None` marks cells the actual loop never produces.
    values: Vec<Option<f64>>,
}

impl RewardTensor {
    pub fn space(&self) -> StateActionSpace {
        self.space
    }

    /// `r(next, action, prev)`; `None` when unreachable.
    pub fn get(&self, prev: usize, action: usize, next: usize) -> Option<f64> {
        let (ns, na) = (self.space.n_states, self.space.n_actions);
        self.values[(prev * na + action) * ns + next]
    }
}

/// `r = −ln( p(s, a | s') / ⁱp(s, a | s') )` cell by cell.
pub fn equivalent_reward(
    problem: &TransitionModel,
    rule: &DecisionRule,
    ideal: &IdealClosedLoopModel,
) -> Result<RewardTensor> {
    check_shapes(problem, ideal)?;
    let space = problem.space();
    let (ns, na) = (space.n_states, space.n_actions);
    let mut values = Vec::with_capacity(ns * na * ns);
    for sp in 0..ns {
        for a in 0..na {
            for s in 0..ns {
                let actual = problem.prob(sp, a, s) * rule.prob(sp, a);
                let target = ideal.joint(sp, a, s);
                values.push(if actual <= 0.0 {
                    None
                } else if target <= 0.0 {
                    Some(f64::NEG_INFINITY)
                } else {
                    Some(-(actual / target).ln())
                });
            }
        }
    }
    Ok(RewardTensor { space, values })
}
