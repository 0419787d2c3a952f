//! Multistep lookahead on finite MDPs.
//!
//! At a state `x` the controller minimizes over `ell` stages, evaluates the
//! leaves with `m` steps of a base policy applied to the terminal cost
//! approximation, and applies the first control of the best plan.
//! Certainty equivalence replaces random outcomes with a nominal one, either
//! at every stage ([`CeMode::CeAll`]) or at every stage but the first
//! ([`CeMode::CeAfterFirst`]).
//!
//! Two evaluation routes are provided. [`lookahead_policy_mdp`] expands the
//! explicit expectimin tree and counts its nodes. [`lookahead_policy`]
//! computes the same values stage by stage, which stays cheap for long
//! horizons.

use serde::{Deserialize, Serialize};

use super::model::{Control, FiniteMdp, Outcome, StationaryPolicy, ValueFunction, TERMINAL};
use super::operators::q_value;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeMode {
    /// Exact expectations at every stage.
    Exact,
    /// Exact first stage, nominal outcomes afterwards.
    CeAfterFirst,
    /// Nominal outcomes everywhere, the first stage included.
    CeAll,
}

/// How the nominal outcome of each `(x, u)` is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NominalSelector {
    /// The most probable outcome, ties to the lowest outcome index.
    MostProbable,
    /// `given[x][k]` is the outcome index for the `k`-th control of `x`
    /// (controls in increasing id order).
    Given(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadSpec {
    pub ell: usize,
    pub m: usize,
    pub base: Option<StationaryPolicy>,
    pub terminal: ValueFunction,
    pub ce_mode: CeMode,
    pub nominal: NominalSelector,
}

impl LookaheadSpec {
    /// Exact one-step lookahead with terminal cost `terminal`.
    pub fn one_step(terminal: ValueFunction) -> Self {
        LookaheadSpec {
            ell: 1,
            m: 0,
            base: None,
            terminal,
            ce_mode: CeMode::Exact,
            nominal: NominalSelector::MostProbable,
        }
    }

    pub fn with_depth(mut self, ell: usize) -> Self {
        self.ell = ell;
        self
    }

    pub fn with_truncated_rollout(mut self, m: usize, base: StationaryPolicy) -> Self {
        self.m = m;
        self.base = Some(base);
        self
    }

    pub fn with_ce(mut self, mode: CeMode) -> Self {
        self.ce_mode = mode;
        self
    }

    pub fn with_nominal(mut self, nominal: NominalSelector) -> Self {
        self.nominal = nominal;
        self
    }

    pub fn validate(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.ell == 0 {
            return Err(Error::invalid("ell", "lookahead depth must be >= 1"));
        }
        if self.m > 0 {
            match &self.base {
                Some(base) => base.check(mdp)?,
                None => {
                    return Err(Error::invalid(
                        "base",
                        "truncated rollout (m > 0) requires a base policy",
                    ))
                }
            }
        }
        self.terminal.check_len(mdp, "terminal")?;
        if let NominalSelector::Given(table) = &self.nominal {
            if table.len() != mdp.state_count() {
                return Err(Error::invalid("nominal", "needs one row per state"));
            }
            for x in mdp.nonterminal_states() {
                let controls = mdp.controls(x);
                if table[x].len() != controls.len() {
                    return Err(Error::invalid(
                        format!("nominal[{x}]"),
                        "needs one entry per admissible control",
                    ));
                }
                for (k, (&w, c)) in table[x].iter().zip(controls).enumerate() {
                    if w >= c.outcomes.len() {
                        return Err(Error::invalid(
                            format!("nominal[{x}][{k}]"),
                            format!("outcome index {w} out of range"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sizes of an explicitly expanded lookahead tree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    /// Every state node visited, the root included.
    pub nodes: u64,
    /// Paths that end at a leaf evaluation or at the termination state.
    pub leaves: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LookaheadDecision {
    pub control: usize,
    /// Backed-up value of the chosen control.
    pub value: f64,
    pub stats: SearchStats,
}

struct Prepared<'a> {
    mdp: &'a FiniteMdp,
    spec: &'a LookaheadSpec,
    leaf: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(mdp: &'a FiniteMdp, spec: &'a LookaheadSpec) -> Result<Self> {
        spec.validate(mdp)?;
        let mut p = Prepared {
            mdp,
            spec,
            leaf: Vec::new(),
        };
        p.leaf = p.leaf_values();
        Ok(p)
    }

    fn nominal_index(&self, x: usize, position: usize, control: &Control) -> usize {
        match &self.spec.nominal {
            NominalSelector::Given(table) => table[x][position],
            NominalSelector::MostProbable => {
                let mut best = 0;
                for (w, o) in control.outcomes.iter().enumerate() {
                    if o.prob > control.outcomes[best].prob {
                        best = w;
                    }
                }
                best
            }
        }
    }

    fn nominal_outcome(&self, x: usize, position: usize, control: &'a Control) -> &'a Outcome {
        &control.outcomes[self.nominal_index(x, position, control)]
    }

    /// `Q` of one control against `next_values`, exact or certainty
    /// equivalent.
    fn stage_value(&self, x: usize, position: usize, control: &Control, exact: bool, j: &[f64]) -> f64 {
        let alpha = self.mdp.discount();
        if exact {
            q_value(alpha, control, j)
        } else {
            let o = &control.outcomes[self.nominal_index(x, position, control)];
            o.cost + alpha * j[o.next]
        }
    }

    /// `(T_base)^m J~`, with nominal propagation under the CE modes.
    fn leaf_values(&self) -> Vec<f64> {
        let mut j = self.spec.terminal.values().to_vec();
        let exact = self.spec.ce_mode == CeMode::Exact;
        if let Some(base) = self.spec.base.as_ref().filter(|_| self.spec.m > 0) {
            for _ in 0..self.spec.m {
                let mut next = vec![0.0; j.len()];
                for x in self.mdp.nonterminal_states() {
                    let position = self
                        .mdp
                        .controls(x)
                        .iter()
                        .position(|c| c.id == base[x])
                        .expect("base validated");
                    let control = &self.mdp.controls(x)[position];
                    next[x] = self.stage_value(x, position, control, exact, &j);
                }
                j = next;
            }
        }
        j[TERMINAL] = 0.0;
        j
    }

    fn first_stage_exact(&self) -> bool {
        self.spec.ce_mode != CeMode::CeAll
    }

    fn deeper_stages_exact(&self) -> bool {
        self.spec.ce_mode == CeMode::Exact
    }

    /// Argmin over controls at `x` against `j`, ties to the lowest id.
    fn best(&self, x: usize, exact: bool, j: &[f64]) -> (usize, f64) {
        let mut best: Option<(usize, f64)> = None;
        for (position, c) in self.mdp.controls(x).iter().enumerate() {
            let v = self.stage_value(x, position, c, exact, j);
            match best {
                Some((_, bv)) if v >= bv => {}
                _ => best = Some((c.id, v)),
            }
        }
        best.expect("nonterminal states have at least one control")
    }

    /// Values with `k` minimization stages to go, `k = 0..ell-1`; the last
    /// entry feeds the first stage.
    fn stage_tables(&self) -> Vec<f64> {
        let exact = self.deeper_stages_exact();
        let mut j = self.leaf.clone();
        for _ in 1..self.spec.ell {
            let mut next = vec![0.0; j.len()];
            for x in self.mdp.nonterminal_states() {
                next[x] = self.best(x, exact, &j).1;
            }
            j = next;
        }
        j
    }

    fn tree_value(&self, x: usize, to_go: usize, stats: &mut SearchStats) -> f64 {
        stats.nodes += 1;
        if x == TERMINAL {
            stats.leaves += 1;
            return 0.0;
        }
        if to_go == 0 {
            stats.leaves += 1;
            return self.leaf[x];
        }
        let exact = self.deeper_stages_exact();
        let mut best: Option<f64> = None;
        for (position, c) in self.mdp.controls(x).iter().enumerate() {
            let v = self.tree_q(x, position, c, exact, to_go, stats);
            if best.is_none_or(|bv| v < bv) {
                best = Some(v);
            }
        }
        best.expect("nonterminal states have at least one control")
    }

    /// Expands one control: every outcome (exact) or the nominal one.
    fn tree_q(
        &self,
        x: usize,
        position: usize,
        control: &'a Control,
        exact: bool,
        to_go: usize,
        stats: &mut SearchStats,
    ) -> f64 {
        let alpha = self.mdp.discount();
        if exact {
            control
                .outcomes
                .iter()
                .map(|o| o.prob * (o.cost + alpha * self.tree_value(o.next, to_go - 1, stats)))
                .sum()
        } else {
            let o = self.nominal_outcome(x, position, control);
            o.cost + alpha * self.tree_value(o.next, to_go - 1, stats)
        }
    }
}

/// Lookahead decision at state `x` by explicit expansion of the
/// expectimin tree.
pub fn lookahead_policy_mdp(
    mdp: &FiniteMdp,
    spec: &LookaheadSpec,
    x: usize,
) -> Result<LookaheadDecision> {
    if x == TERMINAL || x >= mdp.state_count() {
        return Err(Error::invalid("x", format!("{x} is not a nonterminal state")));
    }
    let prepared = Prepared::new(mdp, spec)?;
    let mut stats = SearchStats {
        nodes: 1,
        leaves: 0,
    };
    let exact = prepared.first_stage_exact();
    let mut best: Option<(usize, f64)> = None;
    for (position, c) in mdp.controls(x).iter().enumerate() {
        let v = prepared.tree_q(x, position, c, exact, spec.ell, &mut stats);
        match best {
            Some((_, bv)) if v >= bv => {}
            _ => best = Some((c.id, v)),
        }
    }
    let (control, value) = best.expect("nonterminal states have at least one control");
    Ok(LookaheadDecision {
        control,
        value,
        stats,
    })
}

/// Lookahead policy at every state together with the backed-up values,
/// computed stage by stage.
pub fn lookahead_policy(
    mdp: &FiniteMdp,
    spec: &LookaheadSpec,
) -> Result<(StationaryPolicy, ValueFunction)> {
    let prepared = Prepared::new(mdp, spec)?;
    let table = prepared.stage_tables();
    let exact = prepared.first_stage_exact();
    let mut choice = vec![0; mdp.state_count()];
    let mut values = vec![0.0; mdp.state_count()];
    if let Some(c) = mdp.controls(TERMINAL).first() {
        choice[TERMINAL] = c.id;
    }
    for x in mdp.nonterminal_states() {
        let (u, v) = prepared.best(x, exact, &table);
        choice[x] = u;
        values[x] = v;
    }
    Ok((
        StationaryPolicy::from_raw(choice),
        ValueFunction::from_raw(values),
    ))
}
