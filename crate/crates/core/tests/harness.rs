use std::collections::BTreeSet;

use qucrl::harness::{
    self, emit_plot_data, load_records, summarize, Algorithm, EnvSource, ExperimentConfig,
    GeneratorSpec, Growth, RunRecord, RunStatus, SweepGrid,
};
use qucrl::mdp::envfile;
use qucrl::mdp::generate::chain;
use qucrl::oracle::NoiseMode;
use qucrl::params::Constants;
use qucrl::trace::RunTrace;

fn tabular_env() -> EnvSource {
    EnvSource::Generate(GeneratorSpec::Tabular {
        states: 3,
        actions: 2,
        horizon: 3,
        seed: 1,
    })
}

#[test]
fn sweep_over_seeds_shares_one_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut template = ExperimentConfig::new(tabular_env(), Algorithm::Qucrl, 900);
    template.output_dir = Some(dir.path().to_path_buf());
    let grid = SweepGrid {
        seeds: vec![5, 6, 7],
        ..SweepGrid::default()
    };
    let records = harness::sweep(&template, &grid).unwrap();
    assert_eq!(records.len(), 3);
    let seeds: BTreeSet<u64> = records.iter().map(|r| r.summary.seed).collect();
    assert_eq!(seeds.len(), 3);
    let hashes: BTreeSet<&str> = records
        .iter()
        .map(|r| r.summary.config_hash.as_str())
        .collect();
    assert_eq!(hashes.len(), 1);
    assert!(dir.path().join("runs.csv").is_file());
    let loaded = load_records(dir.path()).unwrap();
    assert_eq!(loaded.len(), 3);
    for r in &loaded {
        let mut prefix = 0.0;
        for (i, row) in r.trace.rows().iter().enumerate() {
            assert_eq!(row.episode, i as u64 + 1);
            prefix += row.instantaneous_regret;
            assert!((row.cumulative_regret - prefix).abs() <= 1e-9);
        }
    }
}

#[test]
fn grid_expands_every_axis() {
    let template = ExperimentConfig::new(tabular_env(), Algorithm::Qucrl, 300);
    let grid = SweepGrid {
        algorithms: vec![Algorithm::Qucrl, Algorithm::ClassicalUcrl],
        episodes: vec![300, 600],
        noise: vec![NoiseMode::Zero, NoiseMode::Boundary],
        constants: vec![
            Constants::default(),
            Constants {
                c1: 0.5,
                ..Constants::default()
            },
        ],
        seeds: vec![1, 2],
    };
    let configs = grid.expand(&template).unwrap();
    assert_eq!(configs.len(), 32);
    let env = template.environment.load().unwrap();
    let hashes: BTreeSet<String> = configs.iter().map(|c| c.hash(&env)).collect();
    assert_eq!(hashes.len(), 16);
    let dup = SweepGrid {
        seeds: vec![1, 1],
        ..SweepGrid::default()
    };
    assert!(dup.expand(&template).is_err());
}

#[test]
fn saved_records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = dir.path().join("chain.json");
    envfile::save(&envfile::Environment::Tabular(chain(3, 2)), &env_path).unwrap();
    let mut config = ExperimentConfig::new(EnvSource::File(env_path), Algorithm::ClassicalUcrl, 50);
    config.seed = 3;
    let record = harness::run(&config).unwrap();
    assert_eq!(record.summary.status, RunStatus::Completed);
    let saved = record.save(&dir.path().join("out")).unwrap();
    let loaded = RunRecord::load(&saved).unwrap();
    assert_eq!(loaded.summary, record.summary);
    assert_eq!(loaded.trace, record.trace);
    assert_eq!(loaded.ledger, record.ledger);
}

/// Replace a real record's curve with `scale·ln T`.
fn synthetic(template: &RunRecord, scale: f64, seed: u64, len: u64) -> RunRecord {
    let mut trace = RunTrace::new();
    let mut previous = 0.0;
    for t in 1..=len {
        let target = scale * (t as f64).ln();
        trace.record_phase(1, target - previous, 0, true, None);
        previous = target;
    }
    let mut record = template.clone();
    record.summary.seed = seed;
    record.summary.run_id = format!("synthetic-s{seed}");
    record.trace = trace;
    record
}

#[test]
fn summarize_recognises_logarithmic_growth() {
    let config = ExperimentConfig::new(tabular_env(), Algorithm::Qucrl, 30);
    let base = harness::run(&config).unwrap();
    let records = vec![
        synthetic(&base, 4.0, 1, 4000),
        synthetic(&base, 6.0, 2, 4000),
    ];
    let reports = summarize(&records);
    assert_eq!(reports.len(), 1);
    let report = &reports[0];
    assert_eq!(report.runs, 2);
    assert!((report.mean_final_regret - 5.0 * 4000f64.ln()).abs() < 1e-9);
    let fit = report.fit.as_ref().unwrap();
    assert!(fit.log_fit.relative_residual < 1e-10);
    assert!((fit.log_fit.slope - 5.0).abs() < 1e-9);
    assert!(fit.sqrt_fit.relative_residual > 1e-4);
    assert_eq!(fit.verdict, Growth::Logarithmic);

    let dir = tempfile::tempdir().unwrap();
    let files = emit_plot_data(&records, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let curve = std::fs::read_to_string(
        files
            .iter()
            .find(|f| f.to_string_lossy().ends_with(".regret.tsv"))
            .unwrap(),
    )
    .unwrap();
    let last: Vec<f64> = curve
        .lines()
        .last()
        .unwrap()
        .split('\t')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(last[0], 4000.0);
    assert!((last[1] - 5.0 * 4000f64.ln()).abs() < 1e-9);
}

#[test]
fn summarize_prefers_square_root_for_square_root_data() {
    let config = ExperimentConfig::new(tabular_env(), Algorithm::ClassicalUcrl, 30);
    let mut record = harness::run(&config).unwrap();
    let mut trace = RunTrace::new();
    let mut previous = 0.0;
    for t in 1..=4000u64 {
        let target = 3.0 * (t as f64).sqrt();
        trace.record_phase(1, target - previous, 0, true, None);
        previous = target;
    }
    record.trace = trace;
    let fit = summarize(&[record])[0].fit.unwrap();
    assert_eq!(fit.verdict, Growth::SquareRoot);
    assert!(fit.sqrt_fit.relative_residual < 1e-10);
    assert!((fit.ratio - 2.0).abs() < 1e-3);
}

#[test]
fn budget_shorter_than_a_phase_is_truncated() {
    let env = EnvSource::Generate(GeneratorSpec::Linmix {
        dim: 2,
        states: 3,
        actions: 2,
        horizon: 2,
        seed: 0,
    });
    let record = harness::run(&ExperimentConfig::new(env, Algorithm::QucrlVtr, 20)).unwrap();
    assert_eq!(record.summary.status, RunStatus::Truncated);
    assert_eq!(record.summary.episodes_run, 20);
    assert_eq!(record.ledger.consumed(), 20);
}
