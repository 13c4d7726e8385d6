use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use crate::oracle::EpisodeLedger;
use crate::trace::RunTrace;
use crate::{Error, Result};

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const CONFIG_FILE: &str = "config.json";
/// Kept apart from the summary so that reruns stay byte-identical.
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// At least one feature search hit its accuracy floor.
    Degenerate,
    /// The budget closed before a single phase completed.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub config_hash: String,
    pub seed: u64,
    pub episode_budget: u64,
    pub episodes_run: u64,
    pub final_regret: f64,
    pub phases: u64,
    pub complete_phases: u64,
    pub updates: u64,
    pub degenerate_phases: u64,
    pub status: RunStatus,
}

impl RunSummary {
    pub(crate) fn from_trace(
        config: &ExperimentConfig,
        config_hash: String,
        trace: &RunTrace,
    ) -> Self {
        let status = if trace.degenerate_phases() > 0 {
            RunStatus::Degenerate
        } else if trace.complete_phases() == 0 {
            RunStatus::Truncated
        } else {
            RunStatus::Completed
        };
        Self {
            run_id: run_id(config.algorithm, &config_hash, config.seed),
            algorithm: config.algorithm,
            config_hash,
            seed: config.seed,
            episode_budget: config.episodes,
            episodes_run: trace.episodes(),
            final_regret: trace.final_regret(),
            phases: trace.phases(),
            complete_phases: trace.complete_phases(),
            updates: trace.updates(),
            degenerate_phases: trace.degenerate_phases(),
            status,
        }
    }
}

/// `<algorithm>-<first 12 hash digits>-s<seed>`.
pub fn run_id(algorithm: Algorithm, config_hash: &str, seed: u64) -> String {
    format!(
        "{algorithm}-{}-s{seed}",
        &config_hash[..12.min(config_hash.len())]
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Timing {
    wall_time_secs: f64,
}

/// A finished run: config, per-episode rows, ledger and summary.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub summary: RunSummary,
    pub trace: RunTrace,
    pub ledger: EpisodeLedger,
    pub wall_time_secs: f64,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

impl RunRecord {
    /// Write the record under `root/<run_id>/` and return that directory.
    pub fn save(&self, root: &Path) -> Result<PathBuf> {
        let dir = root.join(&self.summary.run_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let mut rows = Vec::new();
        self.trace.write_csv(&mut rows)?;
        write(&dir.join(ROWS_FILE), &rows)?;

        let mut ledger = Vec::new();
        self.ledger.write_csv(&mut ledger)?;
        write(&dir.join(LEDGER_FILE), &ledger)?;

        let mut summary = serde_json::to_string_pretty(&self.summary)?;
        summary.push('\n');
        write(&dir.join(SUMMARY_FILE), summary.as_bytes())?;

        let mut config = self.config.clone();
        config.output_dir = None;
        write(&dir.join(CONFIG_FILE), (config.to_json() + "\n").as_bytes())?;

        let timing = serde_json::to_string(&Timing {
            wall_time_secs: self.wall_time_secs,
        })?;
        write(&dir.join(TIMING_FILE), timing.as_bytes())?;
        Ok(dir)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let summary: RunSummary = serde_json::from_slice(&read(&dir.join(SUMMARY_FILE))?)?;
        let config: ExperimentConfig = serde_json::from_slice(&read(&dir.join(CONFIG_FILE))?)?;
        let mut trace = RunTrace::read_csv(read(&dir.join(ROWS_FILE))?.as_slice())?;
        trace.set_complete_phases(summary.complete_phases);
        let ledger = EpisodeLedger::read_csv(
            read(&dir.join(LEDGER_FILE))?.as_slice(),
            summary.episode_budget,
        )?;
        if trace.episodes() != summary.episodes_run || ledger.consumed() != summary.episodes_run {
            return Err(Error::InvalidModel(format!(
                "{}: rows, ledger and summary disagree on the episode count",
                dir.display()
            )));
        }
        let wall_time_secs = read(&dir.join(TIMING_FILE))
            .ok()
            .and_then(|b| serde_json::from_slice::<Timing>(&b).ok())
            .map_or(0.0, |t| t.wall_time_secs);
        Ok(Self {
            config,
            summary,
            trace,
            ledger,
            wall_time_secs,
        })
    }

    /// Persisted files that must be identical across reruns with one seed.
    pub fn deterministic_files() -> [&'static str; 4] {
        [ROWS_FILE, SUMMARY_FILE, LEDGER_FILE, CONFIG_FILE]
    }
}
