//! Contract-level simulation of the quantum query model.
//!
//! Quantum subroutines are not simulated gate by gate. Each estimator
//! returns an answer together with its guaranteed error radius, the failure
//! probability it was run at, and its query cost. [`NoiseModel`] decides
//! where inside the guaranteed radius the answer lands.

mod env;
mod ledger;

pub use env::{SimulatedEnvironment, Trajectory};
pub use ledger::{Charge, ChargeContext, ChargeOutcome, EpisodeLedger, Purpose};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::mdp::{check_distribution, generate::simplex_point, sample_index, INPUT_TOL};
use crate::{Error, Result};

/// Placement of simulated estimates inside their error radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Return the exact quantity.
    Zero,
    /// Error of random size in `[0, ε]` along a random direction.
    Uniform,
    /// Error exactly `ε` along a random direction, then projected onto the
    /// valid set (simplex or `C`-ball).
    Boundary,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(NoiseMode::Zero),
            "uniform" => Ok(NoiseMode::Uniform),
            "boundary" => Ok(NoiseMode::Boundary),
            other => Err(Error::Config(format!("unknown noise mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    /// When set, each estimate fails with its configured probability `δ` and
    /// returns a uniformly random valid output.
    pub failure_injection: bool,
}

impl NoiseModel {
    pub const EXACT: NoiseModel = NoiseModel {
        mode: NoiseMode::Zero,
        failure_injection: false,
    };

    pub fn new(mode: NoiseMode, failure_injection: bool) -> Self {
        Self {
            mode,
            failure_injection,
        }
    }
}

/// What a probability oracle encodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleTag {
    /// `P_h(· | s, a)`.
    Transition {
        h: usize,
        s: usize,
        a: usize,
    },
    /// `d_h^π(s, a)` for the policy with the given id.
    StateActionOccupancy {
        policy_id: u64,
        h: usize,
    },
    /// Law of `s_{h+1}` under the policy with the given id.
    NextState {
        policy_id: u64,
        h: usize,
    },
    Other(String),
}

/// Handle to a finite distribution `p` (the oracle `|0⟩ ↦ Σ √p(ω)|ω⟩`).
///
/// The distribution is only reachable through measurement or the
/// estimation routines in this module.
#[derive(Debug, Clone)]
pub struct ProbabilityOracle {
    dist: Vec<f64>,
    tag: OracleTag,
}

impl ProbabilityOracle {
    pub fn new(dist: Vec<f64>, tag: OracleTag) -> Result<Self> {
        if dist.is_empty() {
            return Err(Error::InvalidModel("empty distribution".into()));
        }
        check_distribution(&dist, 1e-10)
            .map_err(|e| Error::InvalidModel(format!("oracle distribution {e}")))?;
        Ok(Self { dist, tag })
    }

    pub fn support_size(&self) -> usize {
        self.dist.len()
    }

    pub fn tag(&self) -> &OracleTag {
        &self.tag
    }

    /// Prepare the state and measure it in the standard basis.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.dist, rng)
    }
}

/// Handle to a bounded function `X: Ω → R^d` (the oracle `|ω⟩|0⟩ ↦ |ω⟩|X(ω)⟩`).
#[derive(Debug, Clone)]
pub struct BinaryOracle {
    dim: usize,
    /// `[ω][i]`
    values: Vec<f64>,
    bound: f64,
}

impl BinaryOracle {
    /// Checks `‖X(ω)‖₂ ≤ bound` for every outcome.
    pub fn new(values: Vec<Vec<f64>>, bound: f64) -> Result<Self> {
        let dim = values.first().map_or(0, Vec::len);
        if dim == 0 || values.iter().any(|v| v.len() != dim) {
            return Err(Error::Dimension(
                "binary oracle values must be non-empty vectors of equal length".into(),
            ));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::Config(format!(
                "oracle bound must be positive, got {bound}"
            )));
        }
        for (w, v) in values.iter().enumerate() {
            let n = norm(v);
            if !n.is_finite() || n > bound * (1.0 + INPUT_TOL) + INPUT_TOL {
                return Err(Error::InvalidModel(format!(
                    "‖X({w})‖₂ = {n} exceeds declared bound {bound}"
                )));
            }
        }
        Ok(Self {
            dim,
            values: values.into_iter().flatten().collect(),
            bound,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn outcomes(&self) -> usize {
        self.values.len() / self.dim
    }

    fn value(&self, w: usize) -> &[f64] {
        &self.values[w * self.dim..(w + 1) * self.dim]
    }
}

/// Simulated output of a quantum estimation subroutine.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimate: Vec<f64>,
    /// Guaranteed radius: ℓ₁ for amplitude estimation, ℓ₂ for mean estimation.
    pub epsilon: f64,
    pub delta: f64,
    /// The failure event fired; `estimate` is an arbitrary valid output.
    pub failed: bool,
    /// Quantum samples used (amplitude estimation; already charged when they
    /// were collected) or episodes charged (mean estimation).
    pub cost: u64,
}

/// Guaranteed ℓ₁ radius of multi-dimensional amplitude estimation:
/// `min(c_amp · n · ln(n/δ) / samples, 2)` for support size `n`.
pub fn amplitude_epsilon(support: usize, samples: u64, delta: f64, c_amp: f64) -> f64 {
    let n = support as f64;
    (c_amp * n * (n / delta).ln() / samples as f64).min(2.0)
}

/// Episodes needed by mean estimation: `max(1, ⌈c_mean · C · √d · ln(d/δ) / ε⌉)`.
pub fn mean_estimation_cost(bound: f64, dim: usize, epsilon: f64, delta: f64, c_mean: f64) -> u64 {
    let d = dim as f64;
    let raw = (c_mean * bound * d.sqrt() * (d / delta).ln() / epsilon).ceil();
    if raw >= u64::MAX as f64 {
        u64::MAX
    } else {
        (raw as u64).max(1)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "failure probability must lie in (0, 1), got {delta}"
        )))
    }
}

/// Estimate the distribution behind `oracle` from `n_samples` collected
/// quantum samples.
pub fn amplitude_estimate<R: Rng + ?Sized>(
    oracle: &ProbabilityOracle,
    n_samples: u64,
    delta: f64,
    c_amp: f64,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<EstimateReport> {
    if n_samples == 0 {
        return Err(Error::Config(
            "amplitude estimation needs at least one sample".into(),
        ));
    }
    check_delta(delta)?;
    let n = oracle.support_size();
    let epsilon = amplitude_epsilon(n, n_samples, delta, c_amp);
    let failed = noise.failure_injection && rng.random::<f64>() < delta;
    let estimate = if failed {
        simplex_point(n, rng)
    } else {
        let radius = match noise.mode {
            NoiseMode::Zero => 0.0,
            NoiseMode::Uniform => epsilon * rng.random::<f64>(),
            NoiseMode::Boundary => epsilon,
        };
        perturb_on_simplex(&oracle.dist, radius, rng)
    };
    Ok(EstimateReport {
        estimate,
        epsilon,
        delta,
        failed,
        cost: n_samples,
    })
}

/// Move `p` towards a random vertex so that the ℓ₁ displacement is `radius`,
/// or as large as the simplex allows.
///
/// Vertices far enough away are preferred; if none is, the farthest vertex
/// (lowest index on ties) is used and the displacement is `2(1 - min_j p_j)`.
pub(crate) fn perturb_on_simplex<R: Rng + ?Sized>(p: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    if radius <= 0.0 || p.len() < 2 {
        return p.to_vec();
    }
    let reach = |j: usize| 2.0 * (1.0 - p[j]);
    let far: Vec<usize> = (0..p.len()).filter(|&j| reach(j) >= radius).collect();
    let j = if far.is_empty() {
        (0..p.len())
            .min_by(|&a, &b| p[a].total_cmp(&p[b]))
            .expect("non-empty")
    } else {
        far[rng.random_range(0..far.len())]
    };
    if reach(j) <= 0.0 {
        return p.to_vec();
    }
    let t = (radius / reach(j)).min(1.0);
    let mut out: Vec<f64> = p.iter().map(|x| (1.0 - t) * x).collect();
    out[j] += t;
    out
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn project_to_ball(mut x: Vec<f64>, radius: f64) -> Vec<f64> {
    let n = norm(&x);
    if n > radius {
        x.iter_mut().for_each(|v| *v *= radius / n);
    }
    x
}

/// Multivariate mean estimation of `E_{ω~p}[X(ω)]` to ℓ₂ accuracy `epsilon`.
///
/// The episodes are charged to `ctx` before the estimate is produced; if the
/// ledger cannot cover them the call fails with
/// [`Error::BudgetExhausted`] after charging what was left.
#[allow(clippy::too_many_arguments)]
pub fn mean_estimate<R: Rng + ?Sized>(
    p: &ProbabilityOracle,
    x: &BinaryOracle,
    epsilon: f64,
    delta: f64,
    c_mean: f64,
    noise: NoiseModel,
    ledger: &mut EpisodeLedger,
    ctx: ChargeContext,
    rng: &mut R,
) -> Result<EstimateReport> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config(format!(
            "target error must be positive, got {epsilon}"
        )));
    }
    check_delta(delta)?;
    if p.support_size() != x.outcomes() {
        return Err(Error::Dimension(format!(
            "probability oracle has {} outcomes, binary oracle {}",
            p.support_size(),
            x.outcomes()
        )));
    }
    let cost = mean_estimation_cost(x.bound, x.dim, epsilon, delta, c_mean);
    ledger.charge_all(ctx, cost)?;

    let mut mean = vec![0.0; x.dim];
    for (w, pw) in p.dist.iter().enumerate() {
        for (m, v) in mean.iter_mut().zip(x.value(w)) {
            *m += pw * v;
        }
    }
    let failed = noise.failure_injection && rng.random::<f64>() < delta;
    let estimate = if failed {
        let u = random_unit(x.dim, rng);
        let r = x.bound * rng.random::<f64>().powf(1.0 / x.dim as f64);
        u.into_iter().map(|v| v * r).collect()
    } else {
        let radius = match noise.mode {
            NoiseMode::Zero => 0.0,
            NoiseMode::Uniform => epsilon * rng.random::<f64>().powf(1.0 / x.dim as f64),
            NoiseMode::Boundary => epsilon,
        };
        if radius == 0.0 {
            project_to_ball(mean, x.bound)
        } else {
            let u = random_unit(x.dim, rng);
            let moved = mean.iter().zip(&u).map(|(m, d)| m + radius * d).collect();
            project_to_ball(moved, x.bound)
        }
    };
    Ok(EstimateReport {
        estimate,
        epsilon,
        delta,
        failed,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn l1(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    }

    fn l2(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    const CTX: ChargeContext = ChargeContext {
        phase: 1,
        policy_id: 1,
        purpose: Purpose::FeatureEstimation,
    };

    fn oracle(p: &[f64]) -> ProbabilityOracle {
        ProbabilityOracle::new(p.to_vec(), OracleTag::Other("test".into())).unwrap()
    }

    #[test]
    fn zero_noise_amplitude_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = [0.2, 0.3, 0.5];
        let r = amplitude_estimate(&oracle(&p), 10, 0.1, 1.0, NoiseModel::EXACT, &mut rng).unwrap();
        assert_eq!(r.estimate, p);
        assert!(!r.failed);
        assert_eq!(r.cost, 10);
    }

    #[test]
    fn amplitude_epsilon_formula() {
        let eps = amplitude_epsilon(3, 100, 0.1, 1.0);
        assert!((eps - 3.0 * (30.0f64).ln() / 100.0).abs() < 1e-15);
        assert_eq!(amplitude_epsilon(3, 1, 0.1, 1.0), 2.0);
    }

    #[test]
    fn point_mass_keeps_most_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = [0.0, 1.0, 0.0, 0.0];
        let noise = NoiseModel::new(NoiseMode::Boundary, false);
        let samples = 1000;
        let r = amplitude_estimate(&oracle(&p), samples, 0.1, 1.0, noise, &mut rng).unwrap();
        assert!(r.epsilon < 0.1);
        assert!(r.estimate[1] >= 0.9);
    }

    #[test]
    fn boundary_two_outcomes() {
        // On a 2-simplex the farthest reachable point from (q, 1-q) is the
        // vertex opposite the larger coordinate, at ℓ₁ distance 2·max(q, 1-q).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (q, radius) in [(0.3, 0.2), (0.3, 1.0), (0.3, 1.5), (0.5, 1.0), (0.9, 1.9)] {
            let p = [q, 1.0 - q];
            let out = perturb_on_simplex(&p, radius, &mut rng);
            let max_reach: f64 = 2.0 * f64::max(q, 1.0 - q);
            assert!(
                (l1(&out, &p) - radius.min(max_reach)).abs() < 1e-12,
                "q={q} r={radius}"
            );
            assert!(out.iter().all(|x| *x >= 0.0));
            assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn failure_output_is_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = NoiseModel::new(NoiseMode::Zero, true);
        let mut failures = 0;
        for _ in 0..200 {
            let r = amplitude_estimate(&oracle(&[0.5, 0.5]), 5, 0.5, 1.0, noise, &mut rng).unwrap();
            failures += usize::from(r.failed);
            assert!((r.estimate.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(failures > 50 && failures < 150);
    }

    #[test]
    fn amplitude_rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let o = oracle(&[1.0]);
        assert!(amplitude_estimate(&o, 0, 0.1, 1.0, NoiseModel::EXACT, &mut rng).is_err());
        assert!(amplitude_estimate(&o, 1, 1.0, 1.0, NoiseModel::EXACT, &mut rng).is_err());
    }

    #[test]
    fn binary_oracle_bound_checked() {
        assert!(BinaryOracle::new(vec![vec![1.0, 1.0]], 1.0).is_err());
        assert!(BinaryOracle::new(vec![vec![0.6, 0.8]], 1.0).is_ok());
        assert!(BinaryOracle::new(vec![vec![0.6], vec![0.1, 0.2]], 1.0).is_err());
    }

    #[test]
    fn zero_noise_mean_is_exact_and_charged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = oracle(&[0.25, 0.75]);
        let x = BinaryOracle::new(vec![vec![1.0, 0.0], vec![0.0, 0.5]], 1.0).unwrap();
        let mut ledger = EpisodeLedger::new(10_000);
        let r = mean_estimate(
            &p,
            &x,
            0.1,
            0.1,
            1.0,
            NoiseModel::EXACT,
            &mut ledger,
            CTX,
            &mut rng,
        )
        .unwrap();
        assert_eq!(r.estimate, vec![0.25, 0.375]);
        let expect = (2f64.sqrt() * (20f64).ln() / 0.1).ceil() as u64;
        assert_eq!(r.cost, expect);
        assert_eq!(ledger.consumed(), expect);
    }

    #[test]
    fn vacuous_accuracy_costs_little() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = oracle(&[0.5, 0.5]);
        let x = BinaryOracle::new(vec![vec![1.0], vec![-1.0]], 1.0).unwrap();
        let mut ledger = EpisodeLedger::new(100);
        let noise = NoiseModel::new(NoiseMode::Boundary, false);
        let r = mean_estimate(&p, &x, 2.0, 0.5, 1.0, noise, &mut ledger, CTX, &mut rng).unwrap();
        assert_eq!(r.cost, 1);
        assert!(norm(&r.estimate) <= 1.0 + 1e-15);
    }

    #[test]
    fn boundary_mean_error_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = oracle(&[0.5, 0.5]);
        let x = BinaryOracle::new(vec![vec![0.2, 0.0, 0.0], vec![0.0, 0.2, 0.0]], 1.0).unwrap();
        let mu = [0.1, 0.1, 0.0];
        let mut ledger = EpisodeLedger::new(u64::MAX);
        let noise = NoiseModel::new(NoiseMode::Boundary, false);
        for eps in [0.05, 0.3, 0.8] {
            let r =
                mean_estimate(&p, &x, eps, 0.1, 1.0, noise, &mut ledger, CTX, &mut rng).unwrap();
            assert!((l2(&r.estimate, &mu) - eps).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_budget_exhaustion() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = oracle(&[1.0]);
        let x = BinaryOracle::new(vec![vec![1.0]], 1.0).unwrap();
        let mut ledger = EpisodeLedger::new(5);
        let err = mean_estimate(
            &p,
            &x,
            0.01,
            0.1,
            1.0,
            NoiseModel::EXACT,
            &mut ledger,
            CTX,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { charged: 5, .. }));
        assert!(ledger.is_terminated());
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            let noise = NoiseModel::new(NoiseMode::Uniform, true);
            let p = oracle(&[0.1, 0.2, 0.7]);
            let x = BinaryOracle::new(vec![vec![0.1, 0.2], vec![0.3, 0.0], vec![0.0, 0.9]], 1.0)
                .unwrap();
            let mut ledger = EpisodeLedger::new(u64::MAX);
            let a = amplitude_estimate(&p, 17, 0.2, 1.0, noise, &mut rng).unwrap();
            let m =
                mean_estimate(&p, &x, 0.05, 0.2, 1.0, noise, &mut ledger, CTX, &mut rng).unwrap();
            (a, m)
        };
        assert_eq!(run(), run());
    }
}
