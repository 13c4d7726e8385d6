//! Seeded experiment runs, sweeps, persistence and growth fits.

mod config;
mod record;
mod summary;

pub use config::{Algorithm, EnvSource, ExperimentConfig, GeneratorSpec};
pub use record::{run_id, RunRecord, RunStatus, RunSummary, LEDGER_FILE, ROWS_FILE, SUMMARY_FILE};
pub use summary::{
    emit_plot_data, fit_growth, least_squares, mean_curve, summarize, Growth, GrowthFit,
    GrowthReport, LinearFit,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_classical_ucrl, run_classical_ucrl_vtr};
use crate::mdp::envfile::Environment;
use crate::oracle::{EpisodeLedger, NoiseMode};
use crate::params::Constants;
use crate::tabular::run_quantum_ucrl;
use crate::trace::RunTrace;
use crate::vtr::run_quantum_ucrl_vtr;
use crate::{Error, Result};

fn execute(config: &ExperimentConfig, env: &Environment) -> Result<(RunTrace, EpisodeLedger)> {
    let settings = config.settings();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tabular = || match env {
        Environment::Tabular(m) => Ok(m.clone()),
        Environment::LinearMixture(m) => m.to_tabular(),
    };
    let linear = || match env {
        Environment::LinearMixture(m) => Ok(m),
        Environment::Tabular(_) => Err(Error::Config(format!(
            "{} needs a linear mixture environment",
            config.algorithm
        ))),
    };
    Ok(match config.algorithm {
        Algorithm::Qucrl => {
            let r = run_quantum_ucrl(&tabular()?, &settings, &mut rng)?;
            (r.trace, r.ledger)
        }
        Algorithm::ClassicalUcrl => {
            let r = run_classical_ucrl(&tabular()?, &settings, &mut rng)?;
            (r.trace, r.ledger)
        }
        Algorithm::QucrlVtr => {
            let r = run_quantum_ucrl_vtr(linear()?, &settings, &mut rng)?;
            (r.trace, r.ledger)
        }
        Algorithm::ClassicalVtr => {
            let r = run_classical_ucrl_vtr(linear()?, &settings, &mut rng)?;
            (r.trace, r.ledger)
        }
    })
}

/// Execute one run. Output depends only on the config, never on timing.
///
/// When `config.output_dir` is set the record is also saved there.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    let env = config.environment.load()?;
    config.validate(&env)?;
    let hash = config.hash(&env);
    let started = Instant::now();
    let (trace, ledger) = execute(config, &env)?;
    let record = RunRecord {
        summary: RunSummary::from_trace(config, hash, &trace),
        config: config.clone(),
        trace,
        ledger,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &config.output_dir {
        record.save(dir)?;
    }
    Ok(record)
}

/// Axes of a sweep; every combination is run once. Empty axes keep the
/// template's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub episodes: Vec<u64>,
    #[serde(default)]
    pub noise: Vec<NoiseMode>,
    #[serde(default)]
    pub constants: Vec<Constants>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    /// All configs in a fixed order: algorithm, budget, noise, constants, seed.
    pub fn expand(&self, template: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
        if self.seeds.is_empty() {
            return Err(Error::Config("sweep grid needs at least one seed".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("sweep seeds must be distinct".into()));
        }
        let algorithms = axis(&self.algorithms, template.algorithm);
        let episodes = axis(&self.episodes, template.episodes);
        let noise = axis(&self.noise, template.noise);
        let constants = axis(&self.constants, template.constants);
        let mut out = Vec::new();
        for &algorithm in &algorithms {
            for &t in &episodes {
                for &mode in &noise {
                    for &k in &constants {
                        for &seed in &self.seeds {
                            out.push(ExperimentConfig {
                                algorithm,
                                episodes: t,
                                noise: mode,
                                constants: k,
                                seed,
                                ..template.clone()
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn axis<T: Clone>(values: &[T], fallback: T) -> Vec<T> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

/// Run every grid point concurrently. Each run seeds its own generator, so
/// records do not depend on scheduling or grid order. Results come back in
/// [`SweepGrid::expand`] order and, if the template names an output
/// directory, are saved there along with an index `runs.csv`.
pub fn sweep(template: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<RunRecord>> {
    let configs = grid.expand(template)?;
    let env = template.environment.load()?;
    for c in &configs {
        c.validate(&env)?;
    }
    let records = configs
        .par_iter()
        .map(|c| {
            let mut c = c.clone();
            c.output_dir = None;
            run(&c)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &template.output_dir {
        for r in &records {
            r.save(dir)?;
        }
        write_index(dir, &records)?;
    }
    Ok(records)
}

fn write_index(dir: &Path, records: &[RunRecord]) -> Result<()> {
    let mut ids: Vec<&RunSummary> = records.iter().map(|r| &r.summary).collect();
    ids.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let path = dir.join("runs.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "run_id",
        "algorithm",
        "config_hash",
        "seed",
        "final_regret",
        "status",
    ])?;
    for s in ids {
        w.write_record([
            s.run_id.clone(),
            s.algorithm.to_string(),
            s.config_hash.clone(),
            s.seed.to_string(),
            s.final_regret.to_string(),
            serde_json::to_value(s.status)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Load every run directory directly under `root` (those holding a summary),
/// or `root` itself if it is one.
pub fn load_records(root: &Path) -> Result<Vec<RunRecord>> {
    if root.join(SUMMARY_FILE).is_file() {
        return Ok(vec![RunRecord::load(root)?]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SUMMARY_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| RunRecord::load(d)).collect()
}
