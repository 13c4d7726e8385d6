use qucrl::baselines::{run_classical_ucrl, run_classical_ucrl_vtr};
use qucrl::mdp::generate::{random_linear_mixture, random_tabular};
use qucrl::mdp::Dims;
use qucrl::oracle::Purpose;
use qucrl::params::RunSettings;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn zero_reward_baselines_have_no_regret() {
    let dims = Dims::new(3, 2, 3).unwrap();
    let settings = RunSettings::new(2000, 0.1);
    let tab = random_tabular(dims, &mut rng(1)).with_zero_rewards();
    assert_eq!(
        run_classical_ucrl(&tab, &settings, &mut rng(2))
            .unwrap()
            .trace
            .final_regret(),
        0.0
    );
    let mix = random_linear_mixture(2, dims, &mut rng(3)).with_zero_rewards();
    assert_eq!(
        run_classical_ucrl_vtr(&mix, &settings, &mut rng(4))
            .unwrap()
            .trace
            .final_regret(),
        0.0
    );
}

#[test]
fn single_policy_has_no_regret() {
    let tab = random_tabular(Dims::new(1, 1, 3).unwrap(), &mut rng(5));
    let run = run_classical_ucrl(&tab, &RunSettings::new(500, 0.1), &mut rng(6)).unwrap();
    assert_eq!(run.trace.final_regret(), 0.0);
    assert_eq!(run.trace.episodes(), 500);
}

#[test]
fn every_episode_is_one_rollout() {
    let dims = Dims::new(3, 2, 3).unwrap();
    let tab = random_tabular(dims, &mut rng(7));
    let run = run_classical_ucrl(&tab, &RunSettings::new(300, 0.1), &mut rng(8)).unwrap();
    assert_eq!(run.ledger.charges().len(), 300);
    assert!(run
        .ledger
        .charges()
        .iter()
        .all(|c| c.episodes == 1 && c.purpose == Purpose::Rollout));
    assert_eq!(run.trace.phases(), 300);
    let visits: u64 = (0..3)
        .flat_map(|h| (0..3).flat_map(move |s| (0..2).map(move |a| (h, s, a))))
        .map(|(h, s, a)| run.counters.visits(h, s, a))
        .sum();
    assert_eq!(visits, 300 * 3);
}

#[test]
fn tabular_regret_is_stable_across_seed_streams() {
    let dims = Dims::new(2, 2, 2).unwrap();
    let tab = random_tabular(dims, &mut rng(9));
    let settings = RunSettings::new(10_000, 0.1);
    let a = run_classical_ucrl(&tab, &settings, &mut rng(100))
        .unwrap()
        .trace
        .final_regret();
    let b = run_classical_ucrl(&tab, &settings, &mut rng(200))
        .unwrap()
        .trace
        .final_regret();
    assert!(a > 0.0);
    assert!((a - b).abs() <= 0.2 * a, "{a} vs {b}");
}

#[test]
fn mixture_regret_is_stable_across_seed_streams() {
    let dims = Dims::new(2, 2, 2).unwrap();
    let mix = random_linear_mixture(2, dims, &mut rng(10));
    let settings = RunSettings::new(10_000, 0.1);
    let a = run_classical_ucrl_vtr(&mix, &settings, &mut rng(100))
        .unwrap()
        .trace
        .final_regret();
    let b = run_classical_ucrl_vtr(&mix, &settings, &mut rng(200))
        .unwrap()
        .trace
        .final_regret();
    assert!(a > 0.0);
    assert!((a - b).abs() <= 0.2 * a, "{a} vs {b}");
}

#[test]
fn single_kernel_classical_vtr_converges() {
    let dims = Dims::new(3, 2, 2).unwrap();
    let mix = random_linear_mixture(1, dims, &mut rng(11));
    let run = run_classical_ucrl_vtr(&mix, &RunSettings::new(5000, 0.1), &mut rng(12)).unwrap();
    let rows = run.trace.rows();
    assert!(rows[rows.len() - 500..]
        .iter()
        .all(|r| r.instantaneous_regret == 0.0));
    assert!((run.ridges[0].theta()[0] - mix.theta(0)[0]).abs() < 0.1);
}
