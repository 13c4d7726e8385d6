//! Per-episode regret traces shared by every algorithm.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Columns only UCRL-VTR phases fill in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VtrColumns {
    /// `None` when the budget closed before feature estimation finished.
    pub w_k: Option<f64>,
    pub beta_k: f64,
    pub feature_cost: u64,
    pub target_cost: u64,
    /// Smallest `det Λ_h` over steps at the start of the phase.
    pub det_lambda_min: f64,
    pub degenerate: bool,
}

/// One executed episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    /// 1-based episode index.
    pub episode: u64,
    /// 1-based phase index.
    pub phase: u64,
    pub instantaneous_regret: f64,
    pub cumulative_regret: f64,
    /// Model re-estimations (tabular), regression updates (UCRL-VTR) or
    /// policy updates (classical) completed before this episode's phase ended.
    pub updates_so_far: u64,
    pub w_k: Option<f64>,
    pub beta_k: Option<f64>,
    pub feature_cost: Option<u64>,
    pub target_cost: Option<u64>,
    pub det_lambda_min: Option<f64>,
    pub degenerate: Option<bool>,
}

/// Episode-ordered regret trace of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    rows: Vec<EpisodeRow>,
    phases: u64,
    complete_phases: u64,
    degenerate_phases: u64,
    cumulative: f64,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append `episodes` rows for one phase executed under a single policy
    /// whose per-episode regret is `regret`.
    pub fn record_phase(
        &mut self,
        episodes: u64,
        regret: f64,
        updates_so_far: u64,
        complete: bool,
        vtr: Option<VtrColumns>,
    ) {
        self.phases += 1;
        self.complete_phases += u64::from(complete);
        self.degenerate_phases += u64::from(vtr.is_some_and(|v| v.degenerate));
        let phase = self.phases;
        for _ in 0..episodes {
            self.cumulative += regret;
            self.rows.push(EpisodeRow {
                episode: self.rows.len() as u64 + 1,
                phase,
                instantaneous_regret: regret,
                cumulative_regret: self.cumulative,
                updates_so_far,
                w_k: vtr.and_then(|v| v.w_k),
                beta_k: vtr.map(|v| v.beta_k),
                feature_cost: vtr.map(|v| v.feature_cost),
                target_cost: vtr.map(|v| v.target_cost),
                det_lambda_min: vtr.map(|v| v.det_lambda_min),
                degenerate: vtr.map(|v| v.degenerate),
            });
        }
    }

    pub fn rows(&self) -> &[EpisodeRow] {
        &self.rows
    }

    pub fn episodes(&self) -> u64 {
        self.rows.len() as u64
    }

    /// Phases started, including a final truncated one.
    pub fn phases(&self) -> u64 {
        self.phases
    }

    /// Phases that ran to completion before the budget closed.
    pub fn complete_phases(&self) -> u64 {
        self.complete_phases
    }

    pub fn degenerate_phases(&self) -> u64 {
        self.degenerate_phases
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_regret)
    }

    pub fn updates(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.updates_so_far)
    }

    /// Cumulative regret after `t` episodes (clamped to the executed range).
    pub fn regret_at(&self, t: u64) -> f64 {
        match t.min(self.episodes()) {
            0 => 0.0,
            t => self.rows[t as usize - 1].cumulative_regret,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(HEADER)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Rebuild a trace from its CSV form, checking order and prefix sums.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut trace = RunTrace::new();
        let mut last_phase = 0;
        for (i, row) in csv::Reader::from_reader(input)
            .deserialize::<EpisodeRow>()
            .enumerate()
        {
            let row = row?;
            if row.episode != i as u64 + 1 {
                return Err(Error::InvalidModel(format!(
                    "row {} has episode {}, expected {}",
                    i + 1,
                    row.episode,
                    i + 1
                )));
            }
            let expected = trace.cumulative + row.instantaneous_regret;
            if (expected - row.cumulative_regret).abs() > 1e-9 * expected.abs().max(1.0) {
                return Err(Error::InvalidModel(format!(
                    "episode {}: cumulative regret {} is not the prefix sum {expected}",
                    row.episode, row.cumulative_regret
                )));
            }
            if row.phase != last_phase {
                trace.phases += 1;
                trace.degenerate_phases += u64::from(row.degenerate == Some(true));
                last_phase = row.phase;
            }
            trace.cumulative = row.cumulative_regret;
            trace.rows.push(row);
        }
        // Rows do not say whether the last phase ran to completion; every
        // phase is counted as complete until the run summary says otherwise.
        trace.complete_phases = trace.phases;
        Ok(trace)
    }

    pub(crate) fn set_complete_phases(&mut self, n: u64) {
        self.complete_phases = n;
    }
}

const HEADER: [&str; 11] = [
    "episode",
    "phase",
    "instantaneous_regret",
    "cumulative_regret",
    "updates_so_far",
    "w_k",
    "beta_k",
    "feature_cost",
    "target_cost",
    "det_lambda_min",
    "degenerate",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_sums_and_phases() {
        let mut t = RunTrace::new();
        t.record_phase(3, 0.5, 2, true, None);
        t.record_phase(2, 0.25, 4, false, None);
        assert_eq!(t.episodes(), 5);
        assert_eq!(t.phases(), 2);
        assert_eq!(t.complete_phases(), 1);
        assert!((t.final_regret() - 2.0).abs() < 1e-15);
        assert_eq!(t.regret_at(3), 1.5);
        assert_eq!(t.regret_at(0), 0.0);
        assert_eq!(t.updates(), 4);
    }

    #[test]
    fn csv_round_trip() {
        let mut t = RunTrace::new();
        t.record_phase(2, 0.1, 1, true, None);
        let vtr = VtrColumns {
            w_k: Some(0.5),
            beta_k: 3.0,
            feature_cost: 10,
            target_cost: 20,
            det_lambda_min: 1.0,
            degenerate: false,
        };
        t.record_phase(1, 0.3, 2, true, Some(vtr));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&HEADER.join(",")));
        let back = RunTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows(), t.rows());
        assert_eq!(back.phases(), 2);
    }

    #[test]
    fn empty_trace_keeps_header() {
        let mut buf = Vec::new();
        RunTrace::new().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), HEADER.join(","));
    }

    #[test]
    fn rejects_broken_prefix_sum() {
        let text = format!("{}\n1,1,0.5,0.7,0,,,,,,\n", HEADER.join(","));
        assert!(RunTrace::read_csv(text.as_bytes()).is_err());
    }
}
