//! Bellman operators, greedy policies and the Lyapunov condition.

use serde::Serialize;

use super::model::{Control, FiniteMdp, StationaryPolicy, ValueFunction, TERMINAL};
use crate::error::Result;

/// Expected stage cost plus discounted cost-to-go of one control.
/// Infinite successor values propagate (`finite + alpha * inf = inf`).
pub(crate) fn q_value(alpha: f64, control: &Control, j: &[f64]) -> f64 {
    control
        .outcomes
        .iter()
        .map(|o| o.prob * (o.cost + alpha * j[o.next]))
        .sum()
}

/// Lowest-cost control at `x`, ties and all-infinite rows going to the
/// lowest control id.
pub(crate) fn argmin_control(mdp: &FiniteMdp, x: usize, j: &[f64]) -> (usize, f64) {
    let alpha = mdp.discount();
    let mut best: Option<(usize, f64)> = None;
    for c in mdp.controls(x) {
        let v = q_value(alpha, c, j);
        match best {
            Some((_, bv)) if v >= bv => {}
            _ => best = Some((c.id, v)),
        }
    }
    best.expect("nonterminal states have at least one control")
}

/// `(TJ)(x) = min_u E{g(x,u,w) + alpha J(f(x,u,w))}`, with `(TJ)(0) = 0`.
pub fn bellman_operator(mdp: &FiniteMdp, j: &ValueFunction) -> Result<ValueFunction> {
    j.check_len(mdp, "J")?;
    Ok(bellman_unchecked(mdp, j))
}

pub(crate) fn bellman_unchecked(mdp: &FiniteMdp, j: &ValueFunction) -> ValueFunction {
    let mut out = vec![0.0; mdp.state_count()];
    for x in mdp.nonterminal_states() {
        out[x] = argmin_control(mdp, x, j.values()).1;
    }
    ValueFunction::from_raw(out)
}

/// `(T_mu J)(x) = E{g(x,mu(x),w) + alpha J(f(x,mu(x),w))}`.
pub fn policy_operator_mdp(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
    j: &ValueFunction,
) -> Result<ValueFunction> {
    j.check_len(mdp, "J")?;
    policy.check(mdp)?;
    Ok(policy_operator_unchecked(mdp, policy, j))
}

pub(crate) fn policy_operator_unchecked(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
    j: &ValueFunction,
) -> ValueFunction {
    let alpha = mdp.discount();
    let mut out = vec![0.0; mdp.state_count()];
    for x in mdp.nonterminal_states() {
        out[x] = q_value(alpha, policy.control(mdp, x), j.values());
    }
    ValueFunction::from_raw(out)
}

/// One-step lookahead policy with respect to `j`.
pub fn greedy_policy(mdp: &FiniteMdp, j: &ValueFunction) -> Result<StationaryPolicy> {
    j.check_len(mdp, "J")?;
    Ok(greedy_unchecked(mdp, j))
}

pub(crate) fn greedy_unchecked(mdp: &FiniteMdp, j: &ValueFunction) -> StationaryPolicy {
    let mut choice = vec![0; mdp.state_count()];
    if let Some(c) = mdp.controls(TERMINAL).first() {
        choice[TERMINAL] = c.id;
    }
    for x in mdp.nonterminal_states() {
        choice[x] = argmin_control(mdp, x, j.values()).0;
    }
    StationaryPolicy::from_raw(choice)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub holds: bool,
    /// States where `J(x) < (TJ)(x) - 1e-12`.
    pub violations: Vec<usize>,
}

const LYAPUNOV_TOL: f64 = 1e-12;

/// Checks `J(x) >= (TJ)(x)` at every state.
pub fn lyapunov_check(mdp: &FiniteMdp, j: &ValueFunction) -> Result<LyapunovReport> {
    let tj = bellman_operator(mdp, j)?;
    let violations: Vec<usize> = mdp
        .nonterminal_states()
        .filter(|&x| j[x] < tj[x] - LYAPUNOV_TOL)
        .collect();
    Ok(LyapunovReport {
        holds: violations.is_empty(),
        violations,
    })
}
