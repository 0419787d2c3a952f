//! Exact policy evaluation and the properness (stability) test.
//!
//! For `alpha < 1` the policy equation `J = g_mu + alpha P_mu J` is solved
//! directly. For `alpha = 1` the closed-loop chain is split into its closed
//! communicating classes first:
//!
//! * a closed class other than `{t}` that contains a positive-cost transition
//!   is visited forever, so it and every state that can reach it cost `+inf`;
//! * a closed class whose transitions are all cost-free costs zero (the least
//!   fixed point of `T_mu`);
//! * the remaining states are transient and their costs solve a nonsingular
//!   linear system.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::model::{FiniteMdp, StationaryPolicy, ValueFunction, TERMINAL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Properness {
    Stable,
    Unstable,
}

/// Exact cost function `J_mu`.
pub fn policy_evaluation_mdp(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Result<ValueFunction> {
    policy.check(mdp)?;
    evaluate_unchecked(mdp, policy)
}

/// A policy is stable when its cost is finite from every state.
pub fn properness_check(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Result<Properness> {
    policy.check(mdp)?;
    if mdp.discount() < 1.0 {
        return Ok(Properness::Stable);
    }
    let infinite = infinite_states(mdp, policy);
    Ok(if infinite.iter().any(|&b| b) {
        Properness::Unstable
    } else {
        Properness::Stable
    })
}

pub(crate) fn evaluate_unchecked(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Result<ValueFunction> {
    let n = mdp.state_count();
    let mut values = vec![0.0; n];
    // States whose cost comes from the linear system.
    let mut unknown: Vec<usize> = Vec::new();
    if mdp.discount() < 1.0 {
        unknown.extend(mdp.nonterminal_states());
    } else {
        let infinite = infinite_states(mdp, policy);
        let zero = zero_cost_recurrent(mdp, policy);
        for x in mdp.nonterminal_states() {
            if infinite[x] {
                values[x] = f64::INFINITY;
            } else if !zero[x] {
                unknown.push(x);
            }
        }
    }
    if unknown.is_empty() {
        return Ok(ValueFunction::from_raw(values));
    }

    let mut slot = vec![usize::MAX; n];
    for (i, &x) in unknown.iter().enumerate() {
        slot[x] = i;
    }
    let alpha = mdp.discount();
    let size = unknown.len();
    let mut lhs = DMatrix::<f64>::identity(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    for (i, &x) in unknown.iter().enumerate() {
        for o in &policy.control(mdp, x).outcomes {
            rhs[i] += o.prob * o.cost;
            // Successors outside `unknown` are the terminal state or
            // zero-cost recurrent states; they contribute nothing.
            if slot[o.next] != usize::MAX {
                lhs[(i, slot[o.next])] -= alpha * o.prob;
            }
        }
    }
    let solution = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::invalid("policy", "singular policy evaluation system"))?;
    for (i, &x) in unknown.iter().enumerate() {
        values[x] = solution[i].max(0.0);
    }
    Ok(ValueFunction::from_raw(values))
}

fn closed_loop_graph(mdp: &FiniteMdp, policy: &StationaryPolicy) -> DiGraph<(), f64> {
    let n = mdp.state_count();
    let mut graph = DiGraph::<(), f64>::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    graph.add_edge(nodes[TERMINAL], nodes[TERMINAL], 0.0);
    for x in mdp.nonterminal_states() {
        for o in &policy.control(mdp, x).outcomes {
            graph.add_edge(nodes[x], nodes[o.next], o.cost);
        }
    }
    graph
}

/// Closed classes of the closed-loop chain with a flag telling whether any
/// of their transitions has positive cost.
fn closed_classes(graph: &DiGraph<(), f64>) -> Vec<(Vec<usize>, bool)> {
    let mut component = vec![0; graph.node_count()];
    let sccs = tarjan_scc(graph);
    for (c, members) in sccs.iter().enumerate() {
        for node in members {
            component[node.index()] = c;
        }
    }
    let mut out = Vec::new();
    for (c, members) in sccs.iter().enumerate() {
        let mut closed = true;
        let mut costly = false;
        for &node in members {
            for edge in graph.edges(node) {
                use petgraph::visit::EdgeRef;
                if component[edge.target().index()] != c {
                    closed = false;
                }
                if *edge.weight() > 0.0 {
                    costly = true;
                }
            }
        }
        if closed {
            out.push((members.iter().map(|n| n.index()).collect(), costly));
        }
    }
    out
}

/// States from which a positive-cost closed class is reachable.
fn infinite_states(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Vec<bool> {
    let graph = closed_loop_graph(mdp, policy);
    let mut infinite = vec![false; mdp.state_count()];
    let mut stack: Vec<usize> = Vec::new();
    for (members, costly) in closed_classes(&graph) {
        if costly {
            for x in members {
                infinite[x] = true;
                stack.push(x);
            }
        }
    }
    // Backward search over predecessors.
    while let Some(x) = stack.pop() {
        for pred in graph.neighbors_directed(petgraph::graph::NodeIndex::new(x), petgraph::Direction::Incoming) {
            let p = pred.index();
            if !infinite[p] {
                infinite[p] = true;
                stack.push(p);
            }
        }
    }
    infinite
}

fn zero_cost_recurrent(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Vec<bool> {
    let graph = closed_loop_graph(mdp, policy);
    let mut zero = vec![false; mdp.state_count()];
    for (members, costly) in closed_classes(&graph) {
        if !costly {
            for x in members {
                zero[x] = true;
            }
        }
    }
    zero
}
