use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the cost-free absorbing termination state.
pub const TERMINAL: usize = 0;

const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// One disturbance outcome of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    #[serde(rename = "p")]
    pub prob: f64,
    pub next: usize,
    pub cost: f64,
}

/// An admissible control at some state with its outcome distribution. The
/// disturbance `w` is the position within `outcomes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub id: usize,
    pub outcomes: Vec<Outcome>,
}

/// Finite MDP with nonnegative costs and a cost-free absorbing state 0.
///
/// Controls of each state are kept sorted by id, so scanning them in order
/// breaks ties toward the lowest control id.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    discount: f64,
    controls: Vec<Vec<Control>>,
}

impl FiniteMdp {
    /// Builds and validates a model. `controls[x]` lists the admissible
    /// controls of state `x`; state 0 may have no controls, in which case it
    /// is treated as absorbing.
    pub fn new(discount: f64, mut controls: Vec<Vec<Control>>) -> Result<Self> {
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {discount}")));
        }
        let n = controls.len();
        if n == 0 {
            return Err(Error::invalid("states", "at least the termination state is required"));
        }
        for (x, list) in controls.iter_mut().enumerate() {
            list.sort_by_key(|c| c.id);
            if x != TERMINAL && list.is_empty() {
                return Err(Error::invalid(
                    format!("controls[{x}]"),
                    "nonterminal state needs at least one control",
                ));
            }
            for pair in list.windows(2) {
                if pair[0].id == pair[1].id {
                    return Err(Error::invalid(
                        format!("controls[{x}]"),
                        format!("duplicate control id {}", pair[0].id),
                    ));
                }
            }
            for c in list.iter() {
                let path = format!("transitions[{x}][{}]", c.id);
                if c.outcomes.is_empty() {
                    return Err(Error::invalid(path, "empty outcome distribution"));
                }
                let mut total = 0.0;
                for (w, o) in c.outcomes.iter().enumerate() {
                    let path = format!("{path}[{w}]");
                    if !(o.prob.is_finite() && o.prob > 0.0) {
                        return Err(Error::invalid(
                            format!("{path}.p"),
                            format!("probability must be positive, got {}", o.prob),
                        ));
                    }
                    if o.next >= n {
                        return Err(Error::invalid(
                            format!("{path}.next"),
                            format!("state {} out of range 0..{n}", o.next),
                        ));
                    }
                    if !(o.cost.is_finite() && o.cost >= 0.0) {
                        return Err(Error::invalid(
                            format!("{path}.cost"),
                            format!("stage cost must be finite and >= 0, got {}", o.cost),
                        ));
                    }
                    if x == TERMINAL && (o.next != TERMINAL || o.cost != 0.0) {
                        return Err(Error::invalid(
                            path,
                            "termination state must be absorbing and cost-free",
                        ));
                    }
                    total += o.prob;
                }
                if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
                    return Err(Error::invalid(
                        path,
                        format!("probabilities sum to {total}, expected 1"),
                    ));
                }
            }
        }
        Ok(FiniteMdp { discount, controls })
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn state_count(&self) -> usize {
        self.controls.len()
    }

    /// Admissible controls of `x`, sorted by id.
    pub fn controls(&self, x: usize) -> &[Control] {
        &self.controls[x]
    }

    pub fn nonterminal_states(&self) -> impl Iterator<Item = usize> {
        1..self.state_count()
    }

    /// Looks up control `id` at state `x`.
    pub fn control(&self, x: usize, id: usize) -> Option<&Control> {
        let list = &self.controls[x];
        list.binary_search_by_key(&id, |c| c.id).ok().map(|i| &list[i])
    }

    pub fn max_stage_cost(&self) -> f64 {
        self.controls
            .iter()
            .flatten()
            .flat_map(|c| c.outcomes.iter().map(|o| o.cost))
            .fold(0.0, f64::max)
    }
}

/// Cost function over states. Entry 0 is pinned to zero; `+inf` marks states
/// from which a policy never terminates at finite cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueFunction(Vec<f64>);

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("J", "empty value function"));
        }
        for (x, &v) in values.iter().enumerate() {
            if v.is_nan() || v < 0.0 {
                return Err(Error::invalid(format!("J[{x}]"), format!("must be >= 0, got {v}")));
            }
        }
        if values[TERMINAL] != 0.0 {
            return Err(Error::invalid("J[0]", "termination state value must be 0"));
        }
        Ok(ValueFunction(values))
    }

    pub fn zeros(n: usize) -> Self {
        ValueFunction(vec![0.0; n])
    }

    pub(crate) fn from_raw(mut values: Vec<f64>) -> Self {
        values[TERMINAL] = 0.0;
        ValueFunction(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Sup-norm distance; two infinite entries are at distance zero.
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&x, &y)| if x == y { 0.0 } else { (x - y).abs() })
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_len(&self, mdp: &FiniteMdp, what: &str) -> Result<()> {
        if self.len() != mdp.state_count() {
            return Err(Error::invalid(
                what,
                format!("has {} entries, model has {} states", self.len(), mdp.state_count()),
            ));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ValueFunction {
    type Output = f64;

    fn index(&self, x: usize) -> &f64 {
        &self.0[x]
    }
}

/// A stationary policy as a control id per state. The entry for the
/// termination state is ignored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StationaryPolicy(Vec<usize>);

impl StationaryPolicy {
    pub fn new(mdp: &FiniteMdp, choice: Vec<usize>) -> Result<Self> {
        if choice.len() != mdp.state_count() {
            return Err(Error::invalid(
                "policy",
                format!("has {} entries, model has {} states", choice.len(), mdp.state_count()),
            ));
        }
        for x in mdp.nonterminal_states() {
            if mdp.control(x, choice[x]).is_none() {
                return Err(Error::invalid(
                    format!("policy[{x}]"),
                    format!("control {} is not admissible", choice[x]),
                ));
            }
        }
        Ok(StationaryPolicy(choice))
    }

    pub(crate) fn from_raw(choice: Vec<usize>) -> Self {
        StationaryPolicy(choice)
    }

    /// Re-validates this policy against `mdp`.
    pub fn check(&self, mdp: &FiniteMdp) -> Result<()> {
        StationaryPolicy::new(mdp, self.0.clone()).map(|_| ())
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub(crate) fn control<'m>(&self, mdp: &'m FiniteMdp, x: usize) -> &'m Control {
        mdp.control(x, self.0[x])
            .expect("policy validated against this model")
    }
}

impl std::ops::Index<usize> for StationaryPolicy {
    type Output = usize;

    fn index(&self, x: usize) -> &usize {
        &self.0[x]
    }
}
