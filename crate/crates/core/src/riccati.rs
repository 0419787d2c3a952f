//! Closed-form dynamic programming for the undiscounted scalar
//! linear-quadratic problem
//!
//! ```text
//! x_{k+1} = a x_k + b u_k,     cost = sum_k (q x_k^2 + r u_k^2).
//! ```
//!
//! Every value function of interest is quadratic, `J(x) = K x^2`, and every
//! policy of interest is linear, `mu(x) = L x`. The Bellman operator restricted
//! to quadratics is the Riccati operator
//!
//! ```text
//! F(K) = a^2 r K / (r + b^2 K) + q,
//! ```
//!
//! and the Bellman operator of a linear policy is the affine map
//! `F_L(K) = (a + bL)^2 K + q + r L^2`. `F` is the lower envelope of the
//! family `F_L`, touched at the one-step lookahead gain, which is why a
//! one-step lookahead (and rollout, and every policy-iteration step) is a
//! Newton step on `K = F(K)`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Quadratic cost coefficient `K` of `J(x) = K x^2`. Nonnegative; `+inf`
/// encodes the cost of an unstable policy.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Coefficient(f64);

impl Coefficient {
    pub const ZERO: Coefficient = Coefficient(0.0);
    pub const INFINITY: Coefficient = Coefficient(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::invalid(
                "K",
                format!("quadratic coefficient must be >= 0, got {value}"),
            ));
        }
        Ok(Coefficient(value))
    }

    /// Construction for values already known to be nonnegative.
    pub(crate) fn from_nonnegative(value: f64) -> Self {
        debug_assert!(value >= 0.0, "negative coefficient {value}");
        Coefficient(value.max(0.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl TryFrom<f64> for Coefficient {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Coefficient::new(value)
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A linear policy `mu(x) = L x` bound to the problem it was evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearGain {
    gain: f64,
    closed_loop: f64,
    stable: bool,
}

impl LinearGain {
    fn with_closed_loop(gain: f64, closed_loop: f64) -> Self {
        // |a + bL| == 1 is marginal and counts as unstable.
        LinearGain {
            gain,
            closed_loop,
            stable: closed_loop.abs() < 1.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.gain
    }

    /// Closed-loop coefficient `a + bL`.
    pub fn closed_loop(&self) -> f64 {
        self.closed_loop
    }

    pub fn is_stable(&self) -> bool {
        self.stable
    }
}

/// Riccati operator value together with whether it was obtained as the
/// limit `K -> +inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorValue {
    pub value: Coefficient,
    pub at_limit: bool,
}

/// Outcome of a (possibly multistep, possibly truncated) lookahead: the
/// Newton step is taken at `effective_start`, producing `gain` whose true
/// cost coefficient is `cost`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LookaheadResultLq {
    pub effective_start: Coefficient,
    pub gain: LinearGain,
    pub cost: Coefficient,
}

/// The set of `K >= 0` whose one-step lookahead gain is stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityRegion {
    /// `K_S`, clamped at zero.
    pub threshold: f64,
    /// When true the region is `{K > threshold}`, otherwise `{K >= threshold}`.
    pub open: bool,
}

impl StabilityRegion {
    pub fn contains(&self, k: f64) -> bool {
        if self.open {
            k > self.threshold
        } else {
            k >= self.threshold
        }
    }

    /// `K_S` when the region has a boundary point, i.e. `|a| >= 1`.
    pub fn k_s(&self) -> Option<f64> {
        self.open.then_some(self.threshold)
    }
}

/// One policy-iteration iterate: a stable gain and its cost coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyIterate {
    pub gain: LinearGain,
    pub cost: Coefficient,
}

const PI_MAX_ITERATIONS: usize = 200;

/// Coefficients of `x_{k+1} = a x + b u` with stage cost `q x^2 + r u^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarLq {
    a: f64,
    b: f64,
    q: f64,
    r: f64,
}

impl ScalarLq {
    pub fn new(a: f64, b: f64, q: f64, r: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::invalid("a", format!("must be finite, got {a}")));
        }
        if !b.is_finite() || b == 0.0 {
            return Err(Error::invalid("b", format!("must be finite and nonzero, got {b}")));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::invalid("q", format!("must be positive, got {q}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid("r", format!("must be positive, got {r}")));
        }
        Ok(ScalarLq { a, b, q, r })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Binds a raw gain to this problem.
    pub fn gain(&self, l: f64) -> LinearGain {
        LinearGain::with_closed_loop(l, self.a + self.b * l)
    }

    /// `F(K) = a^2 r K / (r + b^2 K) + q`; at `K = +inf` the finite limit
    /// `a^2 r / b^2 + q`.
    pub fn riccati_operator(&self, k: Coefficient) -> Coefficient {
        self.riccati_operator_flagged(k).value
    }

    pub fn riccati_operator_flagged(&self, k: Coefficient) -> OperatorValue {
        let (a, b, q, r) = (self.a, self.b, self.q, self.r);
        if k.is_finite() {
            let k = k.value();
            OperatorValue {
                value: Coefficient::from_nonnegative(a * a * r * k / (r + b * b * k) + q),
                at_limit: false,
            }
        } else {
            OperatorValue {
                value: Coefficient::from_nonnegative(a * a * r / (b * b) + q),
                at_limit: true,
            }
        }
    }

    /// `F'(K) = a^2 r^2 / (r + b^2 K)^2`, which equals the squared closed-loop
    /// coefficient of the greedy gain at `K`.
    pub fn riccati_derivative(&self, k: Coefficient) -> f64 {
        if !k.is_finite() {
            return 0.0;
        }
        let s = self.r + self.b * self.b * k.value();
        let c = self.a * self.r / s;
        c * c
    }

    /// `F_L(K) = (a + bL)^2 K + q + r L^2`.
    pub fn policy_operator(&self, l: f64, k: Coefficient) -> Coefficient {
        let cl = self.a + self.b * l;
        let slope = cl * cl;
        let intercept = self.q + self.r * l * l;
        if !k.is_finite() {
            // 0 * inf must not leak a NaN.
            return if slope == 0.0 {
                Coefficient::from_nonnegative(intercept)
            } else {
                Coefficient::INFINITY
            };
        }
        Coefficient::from_nonnegative(slope * k.value() + intercept)
    }

    /// Positive root `K*` of `b^2 K^2 + (r - a^2 r - q b^2) K - q r = 0`.
    pub fn solve_riccati(&self) -> Coefficient {
        let (a, b, q, r) = (self.a, self.b, self.q, self.r);
        let qa = b * b;
        let qb = r - a * a * r - q * b * b;
        let qc = -q * r;
        let disc = (qb * qb - 4.0 * qa * qc).sqrt();
        // The two root formulas are algebraically equal; pick the one that
        // adds quantities of the same sign.
        let mut k = if qb <= 0.0 {
            (-qb + disc) / (2.0 * qa)
        } else {
            (2.0 * q * r) / (qb + disc)
        };
        // One Newton refinement on F(K) - K = 0; F'(K*) < 1 so the
        // denominator is bounded away from zero.
        let kc = Coefficient::from_nonnegative(k);
        let residual = self.riccati_operator(kc).value() - k;
        let slope = self.riccati_derivative(kc) - 1.0;
        let refined = k - residual / slope;
        if refined.is_finite() && refined > 0.0 {
            k = refined;
        }
        Coefficient::from_nonnegative(k)
    }

    /// Optimal gain `L* = -ab K* / (r + b^2 K*)`.
    pub fn optimal_gain(&self) -> LinearGain {
        self.greedy_gain(self.solve_riccati())
    }

    /// One-step lookahead gain `L = -ab K / (r + b^2 K)`; at `K = +inf` the
    /// limit `-a/b` (deadbeat).
    pub fn greedy_gain(&self, k: Coefficient) -> LinearGain {
        let (a, b, r) = (self.a, self.b, self.r);
        if !k.is_finite() {
            return LinearGain::with_closed_loop(-a / b, 0.0);
        }
        let s = r + b * b * k.value();
        let l = -a * b * k.value() / s;
        LinearGain::with_closed_loop(l, a + b * l)
    }

    /// `K_L = (q + r L^2) / (1 - (a + bL)^2)` for a stable gain, `+inf`
    /// otherwise.
    pub fn policy_cost(&self, l: f64) -> Coefficient {
        let gain = self.gain(l);
        if !gain.is_stable() {
            return Coefficient::INFINITY;
        }
        let cl = gain.closed_loop();
        Coefficient::from_nonnegative((self.q + self.r * l * l) / (1.0 - cl * cl))
    }

    /// `[K0, F(K0), ..., F^n(K0)]`.
    pub fn value_iterate(&self, k0: Coefficient, n: usize) -> Vec<Coefficient> {
        let mut out = Vec::with_capacity(n + 1);
        let mut k = k0;
        out.push(k);
        for _ in 0..n {
            k = self.riccati_operator(k);
            out.push(k);
        }
        out
    }

    /// Newton step on `K = F(K)` taken at `k`, computed by policy
    /// linearization: the greedy gain at `k` followed by its exact cost.
    pub fn newton_step(&self, k: Coefficient) -> LookaheadResultLq {
        let gain = self.greedy_gain(k);
        LookaheadResultLq {
            effective_start: k,
            gain,
            cost: self.policy_cost(gain.value()),
        }
    }

    /// The classical Newton iterate for `K = F(K)`, i.e. the root of the
    /// tangent `K' = F(K) + F'(K)(K' - K)`. Returns `+inf` when the tangent
    /// slope is at least one (no nonnegative crossing).
    pub fn tangent_newton_iterate(&self, k: Coefficient) -> f64 {
        let slope = self.riccati_derivative(k);
        if slope >= 1.0 {
            return f64::INFINITY;
        }
        let f = self.riccati_operator(k).value();
        if !k.is_finite() {
            return f;
        }
        (f - slope * k.value()) / (1.0 - slope)
    }

    /// `ell`-step lookahead with `m`-step truncated rollout of `base`: the
    /// Newton step is taken at `F^{ell-1}(F_base^m(k_tilde))`.
    pub fn lookahead(
        &self,
        k_tilde: Coefficient,
        ell: usize,
        m: usize,
        base: Option<f64>,
    ) -> Result<LookaheadResultLq> {
        if ell == 0 {
            return Err(Error::invalid("ell", "lookahead depth must be >= 1"));
        }
        let mut k = k_tilde;
        if m > 0 {
            let l = base.ok_or_else(|| {
                Error::invalid("base", "truncated rollout (m > 0) requires a base gain")
            })?;
            let g = self.gain(l);
            if !g.is_stable() {
                return Err(Error::UnstableBase(format!(
                    "gain {l} has closed loop {}",
                    g.closed_loop()
                )));
            }
            for _ in 0..m {
                k = self.policy_operator(l, k);
            }
        }
        for _ in 1..ell {
            k = self.riccati_operator(k);
        }
        Ok(self.newton_step(k))
    }

    /// Region of stability `{K : |a + b L_K| < 1}`. With `|a| >= 1` it is the
    /// open half-line above `K_S = r(|a| - 1)/b^2`, the point where
    /// `F'(K_S) = 1`.
    pub fn stability_region(&self) -> StabilityRegion {
        let abs_a = self.a.abs();
        if abs_a < 1.0 {
            StabilityRegion {
                threshold: 0.0,
                open: false,
            }
        } else {
            StabilityRegion {
                threshold: self.r * (abs_a - 1.0) / (self.b * self.b),
                open: true,
            }
        }
    }

    /// Rollout: a Newton step at the cost coefficient of a stable base gain.
    pub fn rollout(&self, base: f64) -> Result<LookaheadResultLq> {
        let k_base = self.policy_cost(base);
        if !k_base.is_finite() {
            return Err(Error::UnstableBase(format!(
                "gain {base} has closed loop {}",
                self.gain(base).closed_loop()
            )));
        }
        Ok(self.newton_step(k_base))
    }

    /// Policy iteration from a stable gain, stopping once
    /// `|K_k - K*| <= tol * max(1, K*)` and `|L_k - L*| <= tol * max(1, |L*|)`.
    pub fn policy_iteration(&self, l0: f64, tol: f64) -> Result<Vec<PolicyIterate>> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
        }
        let k_star = self.solve_riccati().value();
        let l_star = self.greedy_gain(Coefficient::from_nonnegative(k_star)).value();
        let converged = |it: &PolicyIterate| {
            (it.cost.value() - k_star).abs() <= tol * k_star.max(1.0)
                && (it.gain.value() - l_star).abs() <= tol * l_star.abs().max(1.0)
        };
        let mut gain = self.gain(l0);
        let mut cost = self.policy_cost(l0);
        if !cost.is_finite() {
            return Err(Error::UnstableBase(format!(
                "initial gain {l0} has closed loop {}",
                gain.closed_loop()
            )));
        }
        let mut iterates = vec![PolicyIterate { gain, cost }];
        while !converged(iterates.last().expect("nonempty")) {
            if iterates.len() > PI_MAX_ITERATIONS {
                return Err(Error::NonConvergence {
                    iterations: iterates.len() - 1,
                    residual: (cost.value() - k_star).abs(),
                });
            }
            gain = self.greedy_gain(cost);
            cost = self.policy_cost(gain.value());
            iterates.push(PolicyIterate { gain, cost });
        }
        Ok(iterates)
    }

    /// Rollout on top of one-step lookahead: the greedy gain at `k_tilde`
    /// becomes the base policy of a rollout.
    pub fn double_newton(&self, k_tilde: Coefficient) -> Result<LookaheadResultLq> {
        let first = self.greedy_gain(k_tilde);
        if !first.is_stable() {
            return Err(Error::OutsideStabilityRegion(k_tilde.value()));
        }
        self.rollout(first.value())
    }
}
