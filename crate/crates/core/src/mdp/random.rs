//! Seeded random MDP generator.
//!
//! All draws come from `ChaCha8Rng::seed_from_u64(seed)` in this order:
//! state count `n` in `3..=8` (termination state included); then for each
//! nonterminal state `x = 1..n`, a control count in `2..=4`; for each control
//! `u = 0..`, a branching factor in `1..=3`; for each outcome, the successor
//! in `0..n`, the cost `k/10` with `k` in `0..=100`, and an integer weight in
//! `1..=100`. Probabilities are the normalized weights. With
//! `ensure_proper`, the first outcome of control 0 is redirected to the
//! termination state so that the all-zero policy is stable at `alpha = 1`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Control, FiniteMdp, Outcome, StationaryPolicy, ValueFunction, TERMINAL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomMdpConfig {
    pub alpha: f64,
    pub ensure_proper: bool,
}

impl RandomMdpConfig {
    pub fn discounted(alpha: f64) -> Self {
        RandomMdpConfig {
            alpha,
            ensure_proper: false,
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mdp<R: Rng>(rng: &mut R, config: RandomMdpConfig) -> FiniteMdp {
    let n: usize = rng.gen_range(3..=8);
    let mut controls = vec![Vec::new(); n];
    for row in controls.iter_mut().skip(1) {
        let count: usize = rng.gen_range(2..=4);
        for id in 0..count {
            let branching: usize = rng.gen_range(1..=3);
            let mut outcomes = Vec::with_capacity(branching);
            let mut total = 0.0;
            for _ in 0..branching {
                let next = rng.gen_range(0..n);
                let cost = rng.gen_range(0..=100u32) as f64 / 10.0;
                let weight = rng.gen_range(1..=100u32) as f64;
                total += weight;
                outcomes.push(Outcome {
                    prob: weight,
                    next,
                    cost,
                });
            }
            for o in outcomes.iter_mut() {
                o.prob /= total;
            }
            if config.ensure_proper && id == 0 {
                outcomes[0].next = TERMINAL;
            }
            row.push(Control { id, outcomes });
        }
    }
    FiniteMdp::new(config.alpha, controls).expect("generator respects model invariants")
}

pub fn random_mdp_seeded(seed: u64, config: RandomMdpConfig) -> FiniteMdp {
    random_mdp(&mut seeded_rng(seed), config)
}

/// Uniform policy over each state's admissible controls.
pub fn random_policy<R: Rng>(rng: &mut R, mdp: &FiniteMdp) -> StationaryPolicy {
    let choice = (0..mdp.state_count())
        .map(|x| {
            let list = mdp.controls(x);
            if list.is_empty() {
                0
            } else {
                list[rng.gen_range(0..list.len())].id
            }
        })
        .collect();
    StationaryPolicy::from_raw(choice)
}

/// Value function with nonterminal entries uniform in `[0, hi)`.
pub fn random_values<R: Rng>(rng: &mut R, n: usize, hi: f64) -> ValueFunction {
    let mut values: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * hi).collect();
    values[TERMINAL] = 0.0;
    ValueFunction::from_raw(values)
}
