use proptest::prelude::*;
use qucrl::mdp::generate::{
    random_deterministic_policy, random_policy, random_tabular, simplex_point,
};
use qucrl::mdp::{occupancy_measure, policy_evaluation, state_occupancy, Dims, Policy, TabularMdp};
use qucrl::oracle::{
    amplitude_epsilon, amplitude_estimate, mean_estimate, BinaryOracle, ChargeContext,
    ChargeOutcome, EpisodeLedger, NoiseMode, NoiseModel, OracleTag, ProbabilityOracle, Purpose,
    SimulatedEnvironment,
};
use qucrl::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ctx(purpose: Purpose) -> ChargeContext {
    ChargeContext {
        phase: 1,
        policy_id: 7,
        purpose,
    }
}

#[test]
fn csqa_on_deterministic_dynamics_hits_the_reachable_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dims = Dims::new(4, 2, 5).unwrap();
    // s' = (s + a + 1) mod S
    let mdp = TabularMdp::from_fn(
        dims,
        2,
        |_, s, a| {
            let mut row = vec![0.0; 4];
            row[(s + a + 1) % 4] = 1.0;
            row
        },
        |_, _, _| 0.5,
    )
    .unwrap();
    let pi = random_deterministic_policy(dims, &mut rng);
    let env = SimulatedEnvironment::new(&mdp);
    let mut ledger = EpisodeLedger::new(100);
    let mut s = 2;
    for h in 0..5 {
        for _ in 0..5 {
            assert_eq!(
                env.csqa_sample(&pi, h, &mut ledger, ctx(Purpose::Csqa), &mut rng)
                    .unwrap(),
                s
            );
        }
        s = (s + pi.action(h, s) + 1) % 4;
    }
    assert_eq!(ledger.consumed(), 25);
    assert!(ledger
        .charges()
        .iter()
        .all(|c| c.policy_id == 7 && c.episodes == 1));
}

#[test]
fn csqa_stops_when_the_ledger_closes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dims = Dims::new(2, 2, 2).unwrap();
    let mdp = random_tabular(dims, &mut rng);
    let env = SimulatedEnvironment::new(&mdp);
    let pi = Policy::uniform(dims);
    let mut ledger = EpisodeLedger::new(3);
    for _ in 0..3 {
        env.csqa_sample(&pi, 1, &mut ledger, ctx(Purpose::Csqa), &mut rng)
            .unwrap();
    }
    let err = env
        .csqa_sample(&pi, 1, &mut ledger, ctx(Purpose::Csqa), &mut rng)
        .unwrap_err();
    assert!(matches!(err, Error::BudgetExhausted { .. }));
    assert_eq!(ledger.consumed(), 3);
}

#[test]
fn exact_mean_of_next_state_values_matches_occupancy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = Dims::new(3, 2, 3).unwrap();
    let mdp = random_tabular(dims, &mut rng);
    let pi = random_policy(dims, &mut rng);
    let env = SimulatedEnvironment::new(&mdp);
    let values = policy_evaluation(&mdp, &pi).unwrap();
    let mut ledger = EpisodeLedger::new(u64::MAX);
    for h in 0..3 {
        let p = env.next_state_oracle(&pi, 1, h).unwrap();
        let x = env.value_oracle(values.v_row(h + 1), 3.0).unwrap();
        let r = mean_estimate(
            &p,
            &x,
            0.01,
            0.1,
            1.0,
            NoiseModel::EXACT,
            &mut ledger,
            ctx(Purpose::TargetEstimation),
            &mut rng,
        )
        .unwrap();
        let law = state_occupancy(&mdp, &pi, h + 1).unwrap();
        let truth: f64 = law
            .iter()
            .zip(values.v_row(h + 1))
            .map(|(p, v)| p * v)
            .sum();
        assert!((r.estimate[0] - truth).abs() < 1e-14);
        assert!(!r.failed);
    }
    // The occupancy oracle carries the joint (s, a) law.
    let occ = env.occupancy_oracle(&pi, 1, 2).unwrap();
    assert_eq!(occ.support_size(), 6);
    assert_eq!(
        *occ.tag(),
        OracleTag::StateActionOccupancy { policy_id: 1, h: 2 }
    );
    let direct = occupancy_measure(&mdp, &pi, 2).unwrap();
    let estimate = amplitude_estimate(&occ, 10, 0.1, 1.0, NoiseModel::EXACT, &mut rng).unwrap();
    assert_eq!(estimate.estimate, direct);
}

#[test]
fn mean_estimate_truncates_on_exhausted_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = ProbabilityOracle::new(vec![0.5, 0.5], OracleTag::Other("coin".into())).unwrap();
    let x = BinaryOracle::new(vec![vec![0.0], vec![1.0]], 1.0).unwrap();
    let mut ledger = EpisodeLedger::new(5);
    let err = mean_estimate(
        &p,
        &x,
        1e-3,
        0.1,
        1.0,
        NoiseModel::EXACT,
        &mut ledger,
        ctx(Purpose::TargetEstimation),
        &mut rng,
    )
    .unwrap_err();
    assert!(matches!(err, Error::BudgetExhausted { charged: 5, .. }));
    assert!(ledger.is_closed() && ledger.is_terminated());
}

#[test]
fn estimates_replay_under_the_same_seed() {
    let draw = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ProbabilityOracle::new(simplex_point(5, &mut rng), OracleTag::Other("p".into()))
            .unwrap();
        let noise = NoiseModel::new(NoiseMode::Uniform, true);
        (0..20)
            .map(|_| {
                amplitude_estimate(&p, 50, 0.3, 1.0, noise, &mut rng)
                    .unwrap()
                    .estimate
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(draw(11), draw(11));
    assert_ne!(draw(11), draw(12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn charge_log_replays_to_consumption(
        total in 0u64..500,
        requests in proptest::collection::vec(0u64..80, 0..30),
    ) {
        let mut ledger = EpisodeLedger::new(total);
        let mut granted = 0;
        for r in &requests {
            let before = ledger.remaining();
            match ledger.charge(ctx(Purpose::Rollout), *r) {
                ChargeOutcome::Full => {
                    prop_assert!(*r <= before);
                    granted += r;
                }
                ChargeOutcome::Truncated { charged } => {
                    prop_assert!(charged < *r || (*r == 0 && ledger.is_terminated()));
                    prop_assert!(ledger.is_closed());
                    granted += charged;
                }
            }
            prop_assert!(ledger.remaining() <= before);
        }
        let logged: u64 = ledger.charges().iter().map(|c| c.episodes).sum();
        prop_assert_eq!(logged, ledger.consumed());
        prop_assert_eq!(granted, ledger.consumed());
        prop_assert!(ledger.consumed() <= total);
    }

    #[test]
    fn amplitude_estimates_stay_in_contract(
        seed in any::<u64>(),
        n in 1usize..10,
        samples in 1u64..5000,
        mode in prop_oneof![Just(NoiseMode::Zero), Just(NoiseMode::Uniform), Just(NoiseMode::Boundary)],
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = simplex_point(n, &mut rng);
        let oracle = ProbabilityOracle::new(p.clone(), OracleTag::Other("p".into())).unwrap();
        let delta = rng.random_range(0.01..0.5);
        let r = amplitude_estimate(&oracle, samples, delta, 1.0, NoiseModel::new(mode, false), &mut rng).unwrap();
        prop_assert_eq!(r.epsilon, amplitude_epsilon(n, samples, delta, 1.0));
        prop_assert!(r.estimate.iter().all(|x| *x >= 0.0));
        prop_assert!((r.estimate.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let err: f64 = r.estimate.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(err <= r.epsilon + 1e-12);
        prop_assert!(!r.failed);
    }

    #[test]
    fn mean_estimates_stay_in_the_ball(
        seed in any::<u64>(),
        d in 1usize..5,
        eps in 0.01f64..3.0,
        injection in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..6);
        let values: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
        let p = ProbabilityOracle::new(simplex_point(n, &mut rng), OracleTag::Other("p".into())).unwrap();
        let bound = (d as f64).sqrt() / 2.0;
        let x = BinaryOracle::new(values, bound).unwrap();
        let mut ledger = EpisodeLedger::new(u64::MAX);
        let noise = NoiseModel::new(NoiseMode::Boundary, injection);
        let r = mean_estimate(&p, &x, eps, 0.2, 1.0, noise, &mut ledger, ctx(Purpose::FeatureEstimation), &mut rng).unwrap();
        let norm = r.estimate.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(norm <= bound + 1e-12);
        prop_assert_eq!(ledger.consumed(), r.cost);
    }
}
