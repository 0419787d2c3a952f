//! Value iteration, policy iteration and rollout on finite MDPs.

use serde::Serialize;

use super::evaluation::{evaluate_unchecked, properness_check, Properness};
use super::model::{FiniteMdp, StationaryPolicy, ValueFunction};
use super::operators::{bellman_unchecked, greedy_unchecked, policy_operator_unchecked};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueIterationOutcome {
    pub values: ValueFunction,
    pub iterations: usize,
    /// Sup-norm Bellman residual `||T J - J||` of `values`.
    pub residual: f64,
}

/// Iterates `J <- T J` from `j0` until the Bellman residual drops to `tol`.
pub fn value_iteration_mdp(
    mdp: &FiniteMdp,
    j0: &ValueFunction,
    tol: f64,
    max_iters: usize,
) -> Result<ValueIterationOutcome> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    j0.check_len(mdp, "J0")?;
    let mut j = j0.clone();
    let mut iterations = 0;
    loop {
        let next = bellman_unchecked(mdp, &j);
        let residual = next.sup_distance(&j);
        if residual <= tol {
            return Ok(ValueIterationOutcome {
                values: j,
                iterations,
                residual,
            });
        }
        if iterations >= max_iters {
            return Err(Error::NonConvergence {
                iterations,
                residual,
            });
        }
        j = next;
        iterations += 1;
    }
}

/// Number of iterations after which a discounted VI whose initial residual
/// is `initial_residual` has residual at most `tol`: the residual contracts
/// by `alpha` per step.
pub fn vi_iteration_bound(alpha: f64, tol: f64, initial_residual: f64) -> usize {
    if initial_residual <= tol {
        return 0;
    }
    ((tol / initial_residual).ln() / alpha.ln()).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyIterationOutcome {
    pub policy: StationaryPolicy,
    pub values: ValueFunction,
    /// Number of evaluation/improvement rounds.
    pub iterations: usize,
    /// Every policy visited, starting with the initial one.
    pub history: Vec<StationaryPolicy>,
}

const PI_MAX_ITERATIONS: usize = 10_000;
const PI_IMPROVEMENT_TOL: f64 = 1e-12;

fn require_stable(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Result<()> {
    match properness_check(mdp, policy)? {
        Properness::Stable => Ok(()),
        Properness::Unstable => Err(Error::UnstableBase(
            "policy has infinite cost from some state".into(),
        )),
    }
}

/// Policy iteration: repeated exact evaluation and greedy improvement until
/// the improved policy equals the current one.
pub fn policy_iteration_mdp(
    mdp: &FiniteMdp,
    initial: &StationaryPolicy,
) -> Result<PolicyIterationOutcome> {
    require_stable(mdp, initial)?;
    let mut policy = initial.clone();
    let mut values = evaluate_unchecked(mdp, &policy)?;
    let mut history = vec![policy.clone()];
    for iterations in 1..=PI_MAX_ITERATIONS {
        let improved = greedy_unchecked(mdp, &values);
        if improved == policy {
            return Ok(PolicyIterationOutcome {
                policy,
                values,
                iterations,
                history,
            });
        }
        let improved_values = evaluate_unchecked(mdp, &improved)?;
        // A switch between floating-point ties that improves nothing would
        // otherwise be able to cycle.
        let gained = mdp.nonterminal_states().any(|x| {
            improved_values[x] < values[x] - PI_IMPROVEMENT_TOL * (1.0 + values[x].abs())
        });
        if !gained {
            return Ok(PolicyIterationOutcome {
                policy,
                values,
                iterations,
                history,
            });
        }
        policy = improved;
        values = improved_values;
        history.push(policy.clone());
    }
    Err(Error::NonConvergence {
        iterations: PI_MAX_ITERATIONS,
        residual: f64::NAN,
    })
}

/// Rollout horizon of the base policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutHorizon {
    /// Exact `J_base`.
    Infinite,
    /// `m` applications of `T_base` to the zero function.
    Truncated(usize),
}

/// One-step lookahead with the base policy's (possibly truncated) cost as
/// terminal function.
pub fn rollout_policy_mdp(
    mdp: &FiniteMdp,
    base: &StationaryPolicy,
    horizon: RolloutHorizon,
) -> Result<StationaryPolicy> {
    require_stable(mdp, base)?;
    let terminal = match horizon {
        RolloutHorizon::Infinite => evaluate_unchecked(mdp, base)?,
        RolloutHorizon::Truncated(m) => {
            let mut j = ValueFunction::zeros(mdp.state_count());
            for _ in 0..m {
                j = policy_operator_unchecked(mdp, base, &j);
            }
            j
        }
    };
    Ok(greedy_unchecked(mdp, &terminal))
}
