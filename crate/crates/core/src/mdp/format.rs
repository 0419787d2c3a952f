//! JSON interchange format for finite MDPs.
//!
//! ```json
//! {
//!   "states": 2,
//!   "alpha": 0.5,
//!   "controls": [[], [1, 2]],
//!   "transitions": [[], [[{"p": 1.0, "next": 1, "cost": 1.0}],
//!                        [{"p": 1.0, "next": 0, "cost": 3.0}]]]
//! }
//! ```
//!
//! `transitions[x][k]` is the outcome list of the control `controls[x][k]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Control, FiniteMdp, Outcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDocument {
    states: usize,
    alpha: f64,
    controls: Vec<Vec<usize>>,
    transitions: Vec<Vec<Vec<Outcome>>>,
}

/// Parses and validates a model; the error names the first offending field.
pub fn mdp_from_json(text: &str) -> Result<FiniteMdp> {
    let doc: MdpDocument = serde_json::from_str(text)
        .map_err(|e| Error::invalid("document", e.to_string()))?;
    if doc.states == 0 {
        return Err(Error::invalid("states", "must be >= 1"));
    }
    if doc.controls.len() != doc.states {
        return Err(Error::invalid(
            "controls",
            format!("has {} rows, expected {}", doc.controls.len(), doc.states),
        ));
    }
    if doc.transitions.len() != doc.states {
        return Err(Error::invalid(
            "transitions",
            format!("has {} rows, expected {}", doc.transitions.len(), doc.states),
        ));
    }
    let listed = doc.controls.clone();
    let mut controls = Vec::with_capacity(doc.states);
    for (x, (ids, dists)) in doc.controls.into_iter().zip(doc.transitions).enumerate() {
        if ids.len() != dists.len() {
            return Err(Error::invalid(
                format!("transitions[{x}]"),
                format!("has {} entries, controls[{x}] lists {}", dists.len(), ids.len()),
            ));
        }
        controls.push(
            ids.into_iter()
                .zip(dists)
                .map(|(id, outcomes)| Control { id, outcomes })
                .collect(),
        );
    }
    FiniteMdp::new(doc.alpha, controls).map_err(|e| match e {
        Error::Invalid { path, reason } => Error::Invalid {
            path: document_path(&path, &listed),
            reason,
        },
        other => other,
    })
}

/// The model names outcome lists `transitions[x][id]`; the document indexes
/// them by position in `controls[x]`.
fn document_path(path: &str, listed: &[Vec<usize>]) -> String {
    let parsed = path.strip_prefix("transitions[").and_then(|rest| {
        let (x, rest) = rest.split_once("][")?;
        let (id, tail) = rest.split_once(']')?;
        let (x, id) = (x.parse::<usize>().ok()?, id.parse::<usize>().ok()?);
        let k = listed.get(x)?.iter().position(|&c| c == id)?;
        Some(format!("transitions[{x}][{k}]{tail}"))
    });
    parsed.unwrap_or_else(|| path.to_string())
}

pub fn load_mdp(path: &Path) -> Result<FiniteMdp> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid("file", format!("{}: {e}", path.display())))?;
    mdp_from_json(&text)
}

pub fn mdp_to_json(mdp: &FiniteMdp) -> String {
    let n = mdp.state_count();
    let doc = MdpDocument {
        states: n,
        alpha: mdp.discount(),
        controls: (0..n)
            .map(|x| mdp.controls(x).iter().map(|c| c.id).collect())
            .collect(),
        transitions: (0..n)
            .map(|x| mdp.controls(x).iter().map(|c| c.outcomes.clone()).collect())
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("plain data serializes")
}
