use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Algorithm;
use super::record::RunRecord;
use crate::{Error, Result};

/// Least-squares fit `y ≈ slope·g(t) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `‖residual‖₂ / ‖y‖₂` over the fit window (0 for an all-zero curve).
    pub relative_residual: f64,
}

impl LinearFit {
    fn eval(&self, g: f64) -> f64 {
        self.slope * g + self.intercept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Logarithmic,
    SquareRoot,
}

/// Regret growth over the window `[T/4, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub window_start: u64,
    pub window_end: u64,
    pub log_fit: LinearFit,
    pub sqrt_fit: LinearFit,
    /// `Regret(T) / Regret(T/4)`: about 1 for logarithmic growth, 2 for `√T`.
    pub ratio: f64,
    pub verdict: Growth,
}

/// Fit `a·g(t) + b` to `(g(t), y)` pairs.
pub fn least_squares(g: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(g.len(), y.len(), "fit inputs must pair up");
    let n = g.len() as f64;
    let mean_g = g.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let sgg: f64 = g.iter().map(|x| (x - mean_g).powi(2)).sum();
    let sgy: f64 = g
        .iter()
        .zip(y)
        .map(|(x, v)| (x - mean_g) * (v - mean_y))
        .sum();
    let slope = if sgg > 0.0 { sgy / sgg } else { 0.0 };
    let intercept = mean_y - slope * mean_g;
    let fit = LinearFit {
        slope,
        intercept,
        relative_residual: 0.0,
    };
    let rss: f64 = g
        .iter()
        .zip(y)
        .map(|(x, v)| (v - fit.eval(*x)).powi(2))
        .sum();
    let norm: f64 = y.iter().map(|v| v * v).sum();
    LinearFit {
        relative_residual: if norm > 0.0 { (rss / norm).sqrt() } else { 0.0 },
        ..fit
    }
}

/// Fit logarithmic and square-root growth to a cumulative-regret curve
/// (`curve[t - 1]` is the regret after `t` episodes).
pub fn fit_growth(curve: &[f64]) -> Option<GrowthFit> {
    let end = curve.len() as u64;
    let start = (end / 4).max(1);
    if end < 2 || start >= end {
        return None;
    }
    let ts: Vec<f64> = (start..=end).map(|t| t as f64).collect();
    let ys: Vec<f64> = (start..=end).map(|t| curve[t as usize - 1]).collect();
    let logs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let roots: Vec<f64> = ts.iter().map(|t| t.sqrt()).collect();
    let log_fit = least_squares(&logs, &ys);
    let sqrt_fit = least_squares(&roots, &ys);
    let (first, last) = (curve[start as usize - 1], curve[end as usize - 1]);
    let ratio = if first > 0.0 {
        last / first
    } else if last > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let verdict = if log_fit.relative_residual <= sqrt_fit.relative_residual {
        Growth::Logarithmic
    } else {
        Growth::SquareRoot
    };
    Some(GrowthFit {
        window_start: start,
        window_end: end,
        log_fit,
        sqrt_fit,
        ratio,
        verdict,
    })
}

/// Growth fit of the seed-averaged curve of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub label: String,
    pub algorithm: Algorithm,
    pub config_hash: String,
    pub runs: usize,
    pub episodes: u64,
    pub mean_final_regret: f64,
    pub fit: Option<GrowthFit>,
}

/// Pointwise mean of the cumulative-regret curves, truncated to the shortest.
pub fn mean_curve(records: &[&RunRecord]) -> Vec<f64> {
    let len = records
        .iter()
        .map(|r| r.trace.episodes())
        .min()
        .unwrap_or(0) as usize;
    let mut out = vec![0.0; len];
    for r in records {
        for (o, row) in out.iter_mut().zip(r.trace.rows()) {
            *o += row.cumulative_regret;
        }
    }
    let n = records.len().max(1) as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

fn groups(records: &[RunRecord]) -> BTreeMap<(Algorithm, String), Vec<&RunRecord>> {
    let mut groups: BTreeMap<_, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.summary.algorithm, r.summary.config_hash.clone()))
            .or_default()
            .push(r);
    }
    groups
}

fn label(algorithm: Algorithm, hash: &str) -> String {
    format!("{algorithm}-{}", &hash[..12.min(hash.len())])
}

/// Group records by configuration (seeds are replicates) and fit each group.
pub fn summarize(records: &[RunRecord]) -> Vec<GrowthReport> {
    groups(records)
        .into_iter()
        .map(|((algorithm, hash), members)| {
            let curve = mean_curve(&members);
            GrowthReport {
                label: label(algorithm, &hash),
                algorithm,
                runs: members.len(),
                episodes: curve.len() as u64,
                mean_final_regret: curve.last().copied().unwrap_or(0.0),
                fit: fit_growth(&curve),
                config_hash: hash,
            }
        })
        .collect()
}

/// Most points written per series; longer curves are thinned evenly.
const PLOT_POINTS: usize = 2000;

fn plot_ts(len: usize) -> Vec<usize> {
    if len <= PLOT_POINTS {
        return (1..=len).collect();
    }
    let mut ts: Vec<usize> = (1..=PLOT_POINTS).map(|i| i * len / PLOT_POINTS).collect();
    ts.dedup();
    ts
}

fn write_series(path: &Path, points: impl Iterator<Item = (usize, f64)>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# T\tregret").expect("vec write");
    for (t, y) in points {
        writeln!(out, "{t}\t{y}").expect("vec write");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write `<label>.regret.tsv` plus `<label>.logfit.tsv` and
/// `<label>.sqrtfit.tsv` for each configuration group.
pub fn emit_plot_data(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for ((algorithm, hash), members) in groups(records) {
        let curve = mean_curve(&members);
        let name = label(algorithm, &hash);
        let ts = plot_ts(curve.len());
        let path = dir.join(format!("{name}.regret.tsv"));
        write_series(&path, ts.iter().map(|&t| (t, curve[t - 1])))?;
        written.push(path);
        if let Some(fit) = fit_growth(&curve) {
            let path = dir.join(format!("{name}.logfit.tsv"));
            write_series(
                &path,
                ts.iter().map(|&t| (t, fit.log_fit.eval((t as f64).ln()))),
            )?;
            written.push(path);
            let path = dir.join(format!("{name}.sqrtfit.tsv"));
            write_series(
                &path,
                ts.iter()
                    .map(|&t| (t, fit.sqrt_fit.eval((t as f64).sqrt()))),
            )?;
            written.push(path);
        }
    }
    Ok(written)
}
