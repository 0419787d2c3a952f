use super::random::{random_mdp_seeded, RandomMdpConfig};
use super::*;
use crate::error::Error;

const STAY: usize = 1;
const GO: usize = 2;

/// States {t, s}; at s, control 1 stays at cost 1 and control 2 terminates
/// at cost 3.
fn two_state(alpha: f64) -> FiniteMdp {
    FiniteMdp::new(
        alpha,
        vec![
            vec![],
            vec![
                Control {
                    id: STAY,
                    outcomes: vec![Outcome { prob: 1.0, next: 1, cost: 1.0 }],
                },
                Control {
                    id: GO,
                    outcomes: vec![Outcome { prob: 1.0, next: 0, cost: 3.0 }],
                },
            ],
        ],
    )
    .unwrap()
}

fn vf(v: &[f64]) -> ValueFunction {
    ValueFunction::new(v.to_vec()).unwrap()
}

fn policy(mdp: &FiniteMdp, c: &[usize]) -> StationaryPolicy {
    StationaryPolicy::new(mdp, c.to_vec()).unwrap()
}

#[test]
fn bellman_examples() {
    let m = two_state(0.5);
    assert_eq!(bellman_operator(&m, &vf(&[0.0, 0.0])).unwrap().values(), &[0.0, 1.0]);
    assert_eq!(bellman_operator(&m, &vf(&[0.0, 2.0])).unwrap().values(), &[0.0, 2.0]);

    let only_t = FiniteMdp::new(1.0, vec![vec![]]).unwrap();
    assert_eq!(bellman_operator(&only_t, &vf(&[0.0])).unwrap().values(), &[0.0]);
    assert!(bellman_operator(&m, &vf(&[0.0])).is_err());
}

#[test]
fn policy_operator_examples() {
    let m = two_state(0.5);
    let go = policy(&m, &[0, GO]);
    for j in [0.0, 5.0, 1e6] {
        assert_eq!(policy_operator_mdp(&m, &go, &vf(&[0.0, j])).unwrap()[1], 3.0);
    }
    let j = vf(&[0.0, 4.0]);
    let greedy = greedy_policy(&m, &j).unwrap();
    assert_eq!(
        policy_operator_mdp(&m, &greedy, &j).unwrap(),
        bellman_operator(&m, &j).unwrap()
    );
    let stay = policy(&m, &[0, STAY]);
    let j_stay = policy_evaluation_mdp(&m, &stay).unwrap();
    assert_eq!(policy_operator_mdp(&m, &stay, &j_stay).unwrap(), j_stay);
}

#[test]
fn value_iteration_examples() {
    let m = two_state(0.5);
    let out = value_iteration_mdp(&m, &vf(&[0.0, 0.0]), 1e-12, 1000).unwrap();
    assert!((out.values[1] - 2.0).abs() < 1e-11);
    assert!(out.residual <= 1e-12);

    let again = value_iteration_mdp(&m, &vf(&[0.0, 2.0]), 1e-12, 1000).unwrap();
    assert_eq!(again.iterations, 0);

    match value_iteration_mdp(&m, &vf(&[0.0, 0.0]), 1e-12, 3) {
        Err(Error::NonConvergence { iterations, residual }) => {
            assert_eq!(iterations, 3);
            assert!(residual > 1e-12);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn value_iteration_respects_contraction_bound() {
    for seed in 0..20 {
        let m = random_mdp_seeded(seed, RandomMdpConfig::discounted(0.9));
        let j0 = ValueFunction::zeros(m.state_count());
        let r0 = bellman_operator(&m, &j0).unwrap().sup_distance(&j0);
        let bound = vi_iteration_bound(0.9, 1e-10, r0);
        let out = value_iteration_mdp(&m, &j0, 1e-10, 10_000).unwrap();
        assert!(out.iterations <= bound, "seed {seed}: {} > {bound}", out.iterations);
    }
}

fn five_state_mdps(alpha: f64) -> impl Iterator<Item = FiniteMdp> {
    (0u64..)
        .map(move |seed| random_mdp_seeded(seed, RandomMdpConfig::discounted(alpha)))
        .filter(|m| m.state_count() == 5)
}

#[test]
fn value_and_policy_iteration_agree_on_random_mdps() {
    for m in five_state_mdps(0.9).take(100) {
        let pi = policy_iteration_mdp(&m, &policy(&m, &[0; 5])).unwrap();
        let vi = value_iteration_mdp(&m, &ValueFunction::zeros(5), 1e-12, 100_000).unwrap();
        assert!(pi.values.sup_distance(&vi.values) < 1e-9);
        // PI's policy attains the Bellman minimum against the VI values.
        let t = bellman_operator(&m, &vi.values).unwrap();
        let tmu = policy_operator_mdp(&m, &pi.policy, &vi.values).unwrap();
        assert!(t.sup_distance(&tmu) < 1e-9);
    }
}

#[test]
fn policy_evaluation_examples() {
    let m = two_state(1.0);
    assert_eq!(policy_evaluation_mdp(&m, &policy(&m, &[0, GO])).unwrap()[1], 3.0);
    assert_eq!(policy_evaluation_mdp(&m, &policy(&m, &[0, STAY])).unwrap()[1], f64::INFINITY);
    let m = two_state(0.5);
    assert_eq!(policy_evaluation_mdp(&m, &policy(&m, &[0, STAY])).unwrap()[1], 2.0);
}

#[test]
fn zero_cost_cycles_take_the_least_fixed_point() {
    // 1 loops on itself for free; 2 moves to 1 at cost 4 or to 3; 3 loops at cost 1.
    let c = |id, outcomes: Vec<Outcome>| Control { id, outcomes };
    let o = |prob, next, cost| Outcome { prob, next, cost };
    let m = FiniteMdp::new(
        1.0,
        vec![
            vec![],
            vec![c(0, vec![o(1.0, 1, 0.0)])],
            vec![c(0, vec![o(0.5, 1, 4.0), o(0.5, 0, 2.0)]), c(1, vec![o(1.0, 3, 0.0)])],
            vec![c(0, vec![o(1.0, 3, 1.0)])],
        ],
    )
    .unwrap();
    let mu = policy(&m, &[0, 0, 0, 0]);
    let j = policy_evaluation_mdp(&m, &mu).unwrap();
    assert_eq!(j.values()[..3], [0.0, 0.0, 3.0]);
    assert_eq!(j[3], f64::INFINITY);
    assert_eq!(properness_check(&m, &mu).unwrap(), Properness::Unstable);

    // Least fixed point agrees with VI of T_mu from zero on the finite part.
    let mut v = ValueFunction::zeros(4);
    for _ in 0..200 {
        v = policy_operator_mdp(&m, &mu, &v).unwrap();
    }
    assert!((v[2] - 3.0).abs() < 1e-12);
    assert!(v[3] > 150.0);

    let via_3 = policy(&m, &[0, 0, 1, 0]);
    assert_eq!(policy_evaluation_mdp(&m, &via_3).unwrap()[2], f64::INFINITY);
}

#[test]
fn greedy_policy_examples() {
    let m = two_state(0.5);
    assert_eq!(greedy_policy(&m, &vf(&[0.0, 0.0])).unwrap()[1], STAY);
    let j_go = policy_evaluation_mdp(&m, &policy(&m, &[0, GO])).unwrap();
    let rollout = greedy_policy(&m, &j_go).unwrap();
    assert_eq!(rollout[1], STAY);
    assert_eq!(policy_evaluation_mdp(&m, &rollout).unwrap()[1], 2.0);
    // exact tie: 1 + 0.5 * 4 = 3 goes to the lower id
    assert_eq!(greedy_policy(&m, &vf(&[0.0, 4.0])).unwrap()[1], STAY);
}

#[test]
fn greedy_prefers_finite_and_breaks_infinite_ties_low() {
    let m = two_state(1.0);
    assert_eq!(greedy_policy(&m, &vf(&[0.0, f64::INFINITY])).unwrap()[1], GO);
    let c = |id, next| Control {
        id,
        outcomes: vec![Outcome { prob: 1.0, next, cost: 1.0 }],
    };
    let m = FiniteMdp::new(1.0, vec![vec![], vec![c(3, 2), c(5, 2)], vec![c(0, 0)]]).unwrap();
    assert_eq!(greedy_policy(&m, &vf(&[0.0, 0.0, f64::INFINITY])).unwrap()[1], 3);
}

#[test]
fn policy_iteration_examples() {
    let m = two_state(0.5);
    let from_opt = policy_iteration_mdp(&m, &policy(&m, &[0, STAY])).unwrap();
    assert_eq!(from_opt.iterations, 1);
    let from_go = policy_iteration_mdp(&m, &policy(&m, &[0, GO])).unwrap();
    assert_eq!(from_go.iterations, 2);
    assert_eq!(from_go.policy[1], STAY);
    assert_eq!(from_go.values[1], 2.0);
    assert_eq!(from_go.history.len(), 2);

    let m = two_state(1.0);
    assert!(matches!(
        policy_iteration_mdp(&m, &policy(&m, &[0, STAY])),
        Err(Error::UnstableBase(_))
    ));
}

#[test]
fn rollout_examples() {
    let m = two_state(0.5);
    let stay = policy(&m, &[0, STAY]);
    assert_eq!(rollout_policy_mdp(&m, &stay, RolloutHorizon::Infinite).unwrap(), stay);
    let go = policy(&m, &[0, GO]);
    assert_eq!(rollout_policy_mdp(&m, &go, RolloutHorizon::Infinite).unwrap(), stay);
    // T_go^0 0 = 0, so truncated rollout with m = 0 is greedy on zero
    assert_eq!(rollout_policy_mdp(&m, &go, RolloutHorizon::Truncated(0)).unwrap(), stay);

    let m1 = two_state(1.0);
    let stay1 = policy(&m1, &[0, STAY]);
    assert!(rollout_policy_mdp(&m1, &stay1, RolloutHorizon::Infinite).is_err());
    assert!(rollout_policy_mdp(&m1, &stay1, RolloutHorizon::Truncated(3)).is_err());
}

#[test]
fn double_rollout_is_two_policy_iteration_steps() {
    for seed in 0..30 {
        let m = random_mdp_seeded(seed, RandomMdpConfig::discounted(0.9));
        let base = policy(&m, &vec![0; m.state_count()]);
        let once = rollout_policy_mdp(&m, &base, RolloutHorizon::Infinite).unwrap();
        let twice = rollout_policy_mdp(&m, &once, RolloutHorizon::Infinite).unwrap();
        let pi = policy_iteration_mdp(&m, &base).unwrap();
        let prefix: Vec<&StationaryPolicy> = pi.history.iter().take(3).collect();
        let expected = [&base, &once, &twice];
        for (k, p) in prefix.iter().enumerate() {
            assert_eq!(*p, expected[k], "seed {seed} step {k}");
        }
    }
}

#[test]
fn properness_examples() {
    let m = two_state(1.0);
    assert_eq!(properness_check(&m, &policy(&m, &[0, GO])).unwrap(), Properness::Stable);
    assert_eq!(properness_check(&m, &policy(&m, &[0, STAY])).unwrap(), Properness::Unstable);
    let m = two_state(0.9);
    assert_eq!(properness_check(&m, &policy(&m, &[0, STAY])).unwrap(), Properness::Stable);
}

#[test]
fn lyapunov_examples() {
    let m = two_state(1.0);
    let j_go = policy_evaluation_mdp(&m, &policy(&m, &[0, GO])).unwrap();
    assert!(lyapunov_check(&m, &j_go).unwrap().holds);
    let m = two_state(0.5);
    assert!(lyapunov_check(&m, &vf(&[0.0, 2.0])).unwrap().holds);
    let report = lyapunov_check(&m, &vf(&[0.0, 0.0])).unwrap();
    assert!(!report.holds);
    assert_eq!(report.violations, vec![1]);
}

#[test]
fn lookahead_one_step_with_optimal_terminal() {
    let m = two_state(0.5);
    let spec = LookaheadSpec::one_step(vf(&[0.0, 2.0])).with_ce(CeMode::CeAfterFirst);
    let d = lookahead_policy_mdp(&m, &spec, 1).unwrap();
    assert_eq!(d.control, STAY);
    assert_eq!(d.value, 2.0);
}

#[test]
fn lookahead_two_steps_by_path_enumeration() {
    let m = two_state(0.5);
    let spec = LookaheadSpec::one_step(vf(&[0.0, 0.0])).with_depth(2);
    let d = lookahead_policy_mdp(&m, &spec, 1).unwrap();

    // Brute force over the 4 control sequences; a path that terminates
    // stops accruing cost.
    let step = |x: usize, u: usize| -> (usize, f64) {
        if x == 0 {
            return (0, 0.0);
        }
        let o = m.control(x, u).unwrap().outcomes[0];
        (o.next, o.cost)
    };
    let mut best = (usize::MAX, f64::INFINITY);
    for u0 in [STAY, GO] {
        for u1 in [STAY, GO] {
            let (x1, g0) = step(1, u0);
            let (_, g1) = step(x1, u1);
            let total = g0 + 0.5 * g1;
            if total < best.1 {
                best = (u0, total);
            }
        }
    }
    assert_eq!((d.control, d.value), best);
    assert_eq!((d.control, d.value), (STAY, 1.5));
}

/// Three nonterminal states, two controls each with three outcomes that
/// never terminate.
fn branching_mdp() -> FiniteMdp {
    let mut controls = vec![vec![]];
    for x in 1..=3usize {
        let mut row = Vec::new();
        for u in 0..2usize {
            let outcomes = (0..3)
                .map(|w| Outcome {
                    prob: [0.5, 0.3, 0.2][w],
                    next: 1 + (x + u + w) % 3,
                    cost: (x * 3 + u * 2 + w) as f64 * 0.5,
                })
                .collect();
            row.push(Control { id: u, outcomes });
        }
        controls.push(row);
    }
    FiniteMdp::new(0.9, controls).unwrap()
}

#[test]
fn certainty_equivalence_thins_the_tree() {
    let m = branching_mdp();
    let base = LookaheadSpec::one_step(ValueFunction::zeros(4)).with_depth(3);
    let exact = lookahead_policy_mdp(&m, &base, 1).unwrap();
    assert_eq!(exact.stats.leaves, 216);
    let ce = lookahead_policy_mdp(&m, &base.clone().with_ce(CeMode::CeAfterFirst), 1).unwrap();
    assert_eq!(ce.stats.leaves, 24);
    let all = lookahead_policy_mdp(&m, &base.with_ce(CeMode::CeAll), 1).unwrap();
    assert_eq!(all.stats.leaves, 8);
}

#[test]
fn nominal_selection() {
    let m = branching_mdp();
    let j = ValueFunction::new(vec![0.0, 1.0, 5.0, 9.0]).unwrap();
    let spec = LookaheadSpec::one_step(j.clone()).with_ce(CeMode::CeAll);
    // most probable outcome is w = 0
    let d = lookahead_policy_mdp(&m, &spec, 1).unwrap();
    let q = |u: usize, w: usize| {
        let o = m.control(1, u).unwrap().outcomes[w];
        o.cost + 0.9 * j[o.next]
    };
    assert_eq!(d.value, q(0, 0).min(q(1, 0)));

    let table = vec![vec![], vec![2, 2], vec![0, 0], vec![0, 0]];
    let d = lookahead_policy_mdp(&m, &spec.clone().with_nominal(NominalSelector::Given(table)), 1).unwrap();
    assert_eq!(d.value, q(0, 2).min(q(1, 2)));

    let bad = vec![vec![], vec![3, 0], vec![0, 0], vec![0, 0]];
    assert!(lookahead_policy_mdp(&m, &spec.with_nominal(NominalSelector::Given(bad)), 1).is_err());
}

#[test]
fn lookahead_validation() {
    let m = two_state(0.5);
    let spec = LookaheadSpec::one_step(vf(&[0.0, 0.0]));
    assert!(lookahead_policy_mdp(&m, &spec, 0).is_err());
    assert!(lookahead_policy_mdp(&m, &spec.clone().with_depth(0), 1).is_err());
    let mut truncated = spec.clone();
    truncated.m = 2;
    assert!(matches!(
        lookahead_policy_mdp(&m, &truncated, 1),
        Err(Error::Invalid { path, .. }) if path == "base"
    ));
}

#[test]
fn truncated_rollout_leaves() {
    let m = two_state(0.5);
    let go = policy(&m, &[0, GO]);
    // (T_go)^m J~ = 3 at s for m >= 1, so the leaf at s is 3.
    let spec = LookaheadSpec::one_step(vf(&[0.0, 100.0])).with_truncated_rollout(1, go);
    let d = lookahead_policy_mdp(&m, &spec, 1).unwrap();
    assert_eq!((d.control, d.value), (STAY, 2.5));
    let (pol, vals) = lookahead_policy(&m, &spec).unwrap();
    assert_eq!((pol[1], vals[1]), (STAY, 2.5));
}

#[test]
fn json_round_trip_and_validation() {
    let m = random_mdp_seeded(7, RandomMdpConfig::discounted(0.9));
    let text = mdp_to_json(&m);
    assert_eq!(mdp_from_json(&text).unwrap(), m);

    let bad = r#"{"states": 2, "alpha": 0.5, "controls": [[], [0]],
        "transitions": [[], [[{"p": 0.5, "next": 0, "cost": 1.0}]]]}"#;
    match mdp_from_json(bad) {
        Err(Error::Invalid { path, .. }) => assert_eq!(path, "transitions[1][0]"),
        other => panic!("{other:?}"),
    }
    let bad = r#"{"states": 2, "alpha": 0.5, "controls": [[], [0]],
        "transitions": [[], [[{"p": 1.0, "next": 1, "cost": -1.0}]]]}"#;
    match mdp_from_json(bad) {
        Err(Error::Invalid { path, .. }) => assert_eq!(path, "transitions[1][0][0].cost"),
        other => panic!("{other:?}"),
    }
    let bad = r#"{"states": 2, "alpha": 0.5, "controls": [[0], [0]],
        "transitions": [[[{"p": 1.0, "next": 1, "cost": 0.0}]], [[{"p": 1.0, "next": 0, "cost": 1.0}]]]}"#;
    assert!(matches!(mdp_from_json(bad), Err(Error::Invalid { path, .. }) if path == "transitions[0][0][0]"));
    // sparse ids: the path uses the position in controls[1]
    let bad = r#"{"states": 2, "alpha": 0.5, "controls": [[], [7, 3]],
        "transitions": [[], [[{"p": 1.0, "next": 0, "cost": 1.0}], [{"p": 1.0, "next": 5, "cost": 1.0}]]]}"#;
    match mdp_from_json(bad) {
        Err(Error::Invalid { path, .. }) => assert_eq!(path, "transitions[1][1][0].next"),
        other => panic!("{other:?}"),
    }
    let bad = r#"{"states": 3, "alpha": 0.5, "controls": [[], [0]], "transitions": [[], []]}"#;
    assert!(matches!(mdp_from_json(bad), Err(Error::Invalid { path, .. }) if path == "controls"));
    assert!(matches!(mdp_from_json("{"), Err(Error::Invalid { path, .. }) if path == "document"));
    let bad = r#"{"states": 2, "alpha": 1.5, "controls": [[], [0]],
        "transitions": [[], [[{"p": 1.0, "next": 0, "cost": 1.0}]]]}"#;
    assert!(matches!(mdp_from_json(bad), Err(Error::Invalid { path, .. }) if path == "alpha"));
}

#[test]
fn generator_is_deterministic() {
    let cfg = RandomMdpConfig::discounted(0.9);
    assert_eq!(random_mdp_seeded(42, cfg), random_mdp_seeded(42, cfg));
    let proper = RandomMdpConfig {
        alpha: 1.0,
        ensure_proper: true,
    };
    for seed in 0..20 {
        let m = random_mdp_seeded(seed, proper);
        let zero = policy(&m, &vec![0; m.state_count()]);
        assert_eq!(properness_check(&m, &zero).unwrap(), Properness::Stable);
    }
}
