//! Dynamic programming laboratory for approximation in value space.
//!
//! * [`riccati`] gives exact closed forms for the scalar linear-quadratic
//!   problem: Riccati and policy operators, value and policy iteration,
//!   one-step and multistep lookahead, rollout, truncated rollout and the
//!   double Newton step, and the region of stability.
//! * [`mdp`] is the finite-state counterpart: Bellman operators, exact
//!   policy evaluation, value and policy iteration, rollout, expectimin
//!   lookahead with certainty-equivalence variants, and a Lyapunov check.
//! * [`adaptive`] runs the adaptive-control-by-rollout experiments on the
//!   scalar problem: robustness sweeps, closed-loop replanning and the
//!   superlinear ratio of the Newton step.

pub mod adaptive;
pub mod csv;
pub mod error;
pub mod mdp;
pub mod riccati;

pub use error::{Error, Result};
pub use riccati::{Coefficient, LinearGain, LookaheadResultLq, ScalarLq, StabilityRegion};
