use dplab::mdp::random::{
    random_mdp, random_mdp_seeded, random_policy, random_values, seeded_rng, RandomMdpConfig,
};
use dplab::mdp::*;
use proptest::prelude::*;

fn config(alpha: f64) -> RandomMdpConfig {
    RandomMdpConfig::discounted(alpha)
}

fn apply_t(mdp: &FiniteMdp, j: &ValueFunction, times: usize) -> ValueFunction {
    let mut j = j.clone();
    for _ in 0..times {
        j = bellman_operator(mdp, &j).unwrap();
    }
    j
}

fn q_value(mdp: &FiniteMdp, c: &Control, j: &ValueFunction) -> f64 {
    c.outcomes
        .iter()
        .map(|o| o.prob * (o.cost + mdp.discount() * j[o.next]))
        .sum()
}

/// Controls attaining the minimum of `Q*(x, .)` up to round-off.
fn optimal_sets(mdp: &FiniteMdp, j_star: &ValueFunction) -> Vec<Vec<usize>> {
    (0..mdp.state_count())
        .map(|x| {
            let qs: Vec<(usize, f64)> =
                mdp.controls(x).iter().map(|c| (c.id, q_value(mdp, c, j_star))).collect();
            let best = qs.iter().map(|&(_, q)| q).fold(f64::INFINITY, f64::min);
            qs.into_iter()
                .filter(|&(_, q)| q <= best + 1e-9 * (1.0 + best.abs()))
                .map(|(id, _)| id)
                .collect()
        })
        .collect()
}

/// The same MDP with every control collapsed onto its first outcome.
fn deterministic_version(mdp: &FiniteMdp) -> FiniteMdp {
    let controls = (0..mdp.state_count())
        .map(|x| {
            mdp.controls(x)
                .iter()
                .map(|c| Control {
                    id: c.id,
                    outcomes: vec![Outcome {
                        prob: 1.0,
                        ..c.outcomes[0]
                    }],
                })
                .collect()
        })
        .collect();
    FiniteMdp::new(mdp.discount(), controls).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_is_monotone(seed in any::<u64>(), alpha in prop::sample::select(vec![0.5, 0.9, 1.0])) {
        let mut rng = seeded_rng(seed);
        let m = random_mdp(&mut rng, config(alpha));
        let n = m.state_count();
        let j = random_values(&mut rng, n, 20.0);
        let bump = random_values(&mut rng, n, 5.0);
        let j2 = ValueFunction::new(j.values().iter().zip(bump.values()).map(|(a, b)| a + b).collect()).unwrap();
        let (tj, tj2) = (bellman_operator(&m, &j).unwrap(), bellman_operator(&m, &j2).unwrap());
        for x in 0..n {
            prop_assert!(tj[x] <= tj2[x]);
        }
    }

    #[test]
    fn greedy_policy_attains_bellman(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let m = random_mdp(&mut rng, config(0.9));
        let j = random_values(&mut rng, m.state_count(), 20.0);
        let mu = greedy_policy(&m, &j).unwrap();
        prop_assert_eq!(
            policy_operator_mdp(&m, &mu, &j).unwrap(),
            bellman_operator(&m, &j).unwrap()
        );
    }

    #[test]
    fn tree_value_is_iterated_bellman(seed in any::<u64>(), ell in 1usize..=3) {
        let mut rng = seeded_rng(seed);
        let m = random_mdp(&mut rng, config(0.9));
        let j = random_values(&mut rng, m.state_count(), 20.0);
        let spec = LookaheadSpec::one_step(j.clone()).with_depth(ell);
        let target = apply_t(&m, &j, ell);
        let (mu, dp_values) = lookahead_policy(&m, &spec).unwrap();
        for x in m.nonterminal_states() {
            let d = lookahead_policy_mdp(&m, &spec, x).unwrap();
            prop_assert!((d.value - target[x]).abs() <= 1e-12 * target[x].max(1.0));
            prop_assert_eq!(d.value, dp_values[x]);
            prop_assert_eq!(d.control, mu[x]);
        }
        // the control is greedy with respect to T^{ell-1} J
        let inner = apply_t(&m, &j, ell - 1);
        prop_assert_eq!(&mu, &greedy_policy(&m, &inner).unwrap());
    }

    #[test]
    fn lyapunov_terminal_gives_stable_lookahead(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let m = random_mdp(&mut rng, RandomMdpConfig { alpha: 1.0, ensure_proper: true });
        // J_mu of a proper policy satisfies J >= T J
        let choice = (0..m.state_count())
            .map(|x| m.controls(x).first().map_or(0, |c| c.id))
            .collect();
        let mu = StationaryPolicy::new(&m, choice).unwrap();
        prop_assert_eq!(properness_check(&m, &mu).unwrap(), Properness::Stable);
        let j = policy_evaluation_mdp(&m, &mu).unwrap();
        prop_assert!(lyapunov_check(&m, &j).unwrap().holds);
        let lookahead = greedy_policy(&m, &j).unwrap();
        prop_assert_eq!(properness_check(&m, &lookahead).unwrap(), Properness::Stable);
        let j_new = policy_evaluation_mdp(&m, &lookahead).unwrap();
        for x in 0..m.state_count() {
            prop_assert!(j_new[x] <= j[x] + 1e-9 * (1.0 + j[x]));
        }
    }

    #[test]
    fn lookahead_is_deterministic(seed in any::<u64>()) {
        let m = random_mdp_seeded(seed, config(0.9));
        let spec = LookaheadSpec::one_step(ValueFunction::zeros(m.state_count())).with_depth(3);
        prop_assert_eq!(lookahead_policy(&m, &spec).unwrap(), lookahead_policy(&m, &spec).unwrap());
        for x in m.nonterminal_states() {
            prop_assert_eq!(
                lookahead_policy_mdp(&m, &spec, x).unwrap(),
                lookahead_policy_mdp(&m, &spec, x).unwrap()
            );
        }
    }

    #[test]
    fn certainty_equivalence_is_exact_without_noise(seed in any::<u64>(), ell in 1usize..=3) {
        let mut rng = seeded_rng(seed);
        let m = deterministic_version(&random_mdp(&mut rng, config(0.9)));
        let j = random_values(&mut rng, m.state_count(), 20.0);
        let exact = LookaheadSpec::one_step(j).with_depth(ell);
        let reference = lookahead_policy(&m, &exact).unwrap();
        for mode in [CeMode::CeAfterFirst, CeMode::CeAll] {
            prop_assert_eq!(&lookahead_policy(&m, &exact.clone().with_ce(mode)).unwrap(), &reference);
        }
    }
}

#[test]
fn ce_after_first_one_step_is_greedy() {
    for seed in 0..100 {
        let mut rng = seeded_rng(seed);
        let m = random_mdp(&mut rng, config(0.9));
        let j = random_values(&mut rng, m.state_count(), 20.0);
        let spec = LookaheadSpec::one_step(j.clone()).with_ce(CeMode::CeAfterFirst);
        let greedy = greedy_policy(&m, &j).unwrap();
        for x in m.nonterminal_states() {
            assert_eq!(lookahead_policy_mdp(&m, &spec, x).unwrap().control, greedy[x]);
        }
    }
}

#[test]
fn rollout_improves_and_repeats_into_policy_iteration() {
    for alpha in [0.5, 0.9] {
        for seed in 0..100 {
            let mut rng = seeded_rng(seed);
            let m = random_mdp(&mut rng, config(alpha));
            let base = random_policy(&mut rng, &m);
            let j_base = policy_evaluation_mdp(&m, &base).unwrap();
            let rolled = rollout_policy_mdp(&m, &base, RolloutHorizon::Infinite).unwrap();
            let j_rolled = policy_evaluation_mdp(&m, &rolled).unwrap();
            for x in 0..m.state_count() {
                assert!(j_rolled[x] <= j_base[x] + 1e-9, "seed {seed} state {x}");
            }
            let pi = policy_iteration_mdp(&m, &base).unwrap();
            let mut current = base.clone();
            for expected in &pi.history[1..] {
                current = rollout_policy_mdp(&m, &current, RolloutHorizon::Infinite).unwrap();
                assert_eq!(&current, expected, "seed {seed}");
            }
        }
    }
}

#[test]
fn long_lookahead_becomes_optimal() {
    for seed in 0..25 {
        let mut rng = seeded_rng(1000 + seed);
        let m = random_mdp(&mut rng, config(0.9));
        let start = StationaryPolicy::new(
            &m,
            (0..m.state_count()).map(|x| m.controls(x).first().map_or(0, |c| c.id)).collect(),
        )
        .unwrap();
        let pi = policy_iteration_mdp(&m, &start).unwrap();
        let sets = optimal_sets(&m, &pi.values);
        // J~ far from J*: large and reversed in rank
        let scaled: Vec<f64> =
            (0..m.state_count()).map(|x| if x == 0 { 0.0 } else { 1e4 / x as f64 }).collect();
        let terminal = ValueFunction::new(scaled).unwrap();
        let optimal_at = |ell: usize| {
            let spec = LookaheadSpec::one_step(terminal.clone()).with_depth(ell);
            let (mu, _) = lookahead_policy(&m, &spec).unwrap();
            m.nonterminal_states().all(|x| sets[x].contains(&mu[x]))
        };
        let flags: Vec<bool> = (1..=200).map(optimal_at).collect();
        let last_bad = flags.iter().rposition(|&ok| !ok).map_or(0, |i| i + 1);
        assert!(last_bad < 200, "seed {seed}: never settles");
    }
}
