//! Finite-state, finite-control MDPs with a cost-free termination state.

mod evaluation;
mod format;
mod lookahead;
mod model;
mod operators;
pub mod random;
mod solve;

pub use evaluation::{policy_evaluation_mdp, properness_check, Properness};
pub use format::{load_mdp, mdp_from_json, mdp_to_json};
pub use lookahead::{
    lookahead_policy, lookahead_policy_mdp, CeMode, LookaheadDecision, LookaheadSpec,
    NominalSelector, SearchStats,
};
pub use model::{Control, FiniteMdp, Outcome, StationaryPolicy, ValueFunction, TERMINAL};
pub use operators::{
    bellman_operator, greedy_policy, lyapunov_check, policy_operator_mdp, LyapunovReport,
};
pub use solve::{
    policy_iteration_mdp, rollout_policy_mdp, value_iteration_mdp, vi_iteration_bound,
    PolicyIterationOutcome, RolloutHorizon, ValueIterationOutcome,
};

#[cfg(test)]
mod tests;
