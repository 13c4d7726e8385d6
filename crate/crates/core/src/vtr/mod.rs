//! Quantum UCRL-VTR for linear mixture MDPs.
//!
//! A phase plans optimistically against per-step confidence ellipsoids, then
//! spends episodes under the planned policy on two rounds of quantum mean
//! estimation: the expected features `φ_h^k = E[φ_{V_{h+1}^k}(s_h, a_h)]`,
//! found by a doubling search on accuracy, and the regression targets
//! `E[V_{h+1}^k(s_{h+1})]`. Each phase adds one weighted sample per step,
//! which at the most uncertain step doubles `det Λ_h`.

mod ridge;

pub use ridge::{confidence_radius, ConfidenceEllipsoid, RidgeSample, RidgeState};

use rand::Rng;

use crate::mdp::{
    occupancy_measure, optimal_values, policy_evaluation, Dims, FeatureMap, LinearMixtureMdp,
    Policy, TabularMdp, ValueTable,
};
use crate::oracle::{
    mean_estimate, BinaryOracle, ChargeContext, EpisodeLedger, Purpose, SimulatedEnvironment,
};
use crate::params::RunSettings;
use crate::trace::{RunTrace, VtrColumns};
use crate::{Error, Result};

/// Backward induction with the pointwise ellipsoid maximum
/// `Q_h = clip[0,H](R_h + φ_{V_{h+1}}ᵀθ̄_h + β‖φ_{V_{h+1}}‖_{Λ_h⁻¹})`.
pub fn optimistic_planning(
    features: &FeatureMap,
    rewards: &[f64],
    horizon: usize,
    ellipsoids: &[ConfidenceEllipsoid],
) -> Result<(ValueTable, Policy)> {
    let dims = Dims::new(features.states(), features.actions(), horizon)?;
    if rewards.len() != dims.triples() || ellipsoids.len() != horizon {
        return Err(Error::Dimension(format!(
            "planning needs {} rewards and {horizon} ellipsoids, got {} and {}",
            dims.triples(),
            rewards.len(),
            ellipsoids.len()
        )));
    }
    let cap = horizon as f64;
    let mut values = ValueTable::zeros(dims);
    let mut phi = vec![0.0; features.dim()];
    for h in (0..horizon).rev() {
        for s in 0..dims.states {
            for a in 0..dims.actions {
                features.phi_v_into(values.v_row(h + 1), s, a, &mut phi);
                let q = rewards[dims.sa(h, s, a)] + ellipsoids[h].upper_value(&phi);
                values.set_q(h, s, a, q.clamp(0.0, cap));
            }
        }
        values.set_v_greedy(h);
    }
    let pi = Policy::greedy(&values);
    Ok((values, pi))
}

/// Output of the feature search.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEstimates {
    /// `φ̂_h` per step.
    pub phi_hat: Vec<Vec<f64>>,
    /// `max_h ‖φ̂_h‖_{Λ_h⁻¹}`, raised to `ε_floor` for degenerate searches.
    pub w: f64,
    /// Step attaining the maximum.
    pub argmax_step: usize,
    /// Final accuracy level `m`; the estimates have ℓ₂ accuracy `2^-m`.
    pub level: u32,
    pub degenerate: bool,
    pub failed: bool,
    pub cost: u64,
}

/// Output of target estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimates {
    /// `y_h` per step, in `[0, H]`.
    pub y: Vec<f64>,
    /// Estimates before clamping to `[0, H]`.
    pub raw: Vec<f64>,
    pub failed: bool,
    pub cost: u64,
}

/// Everything the estimation routines need besides the policy.
#[derive(Debug, Clone, Copy)]
pub struct EstimationContext<'e, 'm> {
    pub env: &'e SimulatedEnvironment<'m>,
    pub features: &'e FeatureMap,
    pub settings: &'e RunSettings,
    /// Failure probability of each mean-estimation call.
    pub delta: f64,
    pub phase: u64,
}

impl EstimationContext<'_, '_> {
    fn charge(&self, purpose: Purpose) -> ChargeContext {
        ChargeContext {
            phase: self.phase,
            policy_id: self.phase,
            purpose,
        }
    }
}

fn feature_oracle(
    features: &FeatureMap,
    next_values: &[f64],
    horizon: usize,
) -> Result<BinaryOracle> {
    let mut rows = Vec::with_capacity(features.states() * features.actions());
    for s in 0..features.states() {
        for a in 0..features.actions() {
            rows.push(features.phi_v(next_values, s, a));
        }
    }
    // ‖φ_V‖ ≤ H for V in [0, H]; allow for round-off in validated feature maps.
    let largest = rows
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    BinaryOracle::new(rows, (horizon as f64).max(largest))
}

/// Doubling search on accuracy for `φ_h^k`, one mean estimation per step and
/// level.
///
/// Starting from `m = 1` with zero iterates, while every step has
/// `‖φ̂_{h,m-1}‖_{Λ_h⁻¹} < 2^{2-m}` the level is raised and all steps are
/// re-estimated to accuracy `2^{-m}`. The search stops at
/// `⌈log₂(1/ε_floor)⌉` and then reports a degenerate phase.
pub fn estimate_features<R: Rng + ?Sized>(
    cx: &EstimationContext<'_, '_>,
    pi: &Policy,
    values: &ValueTable,
    ridges: &[RidgeState],
    ledger: &mut EpisodeLedger,
    rng: &mut R,
) -> Result<FeatureEstimates> {
    let dims = cx.env.dims();
    let horizon = dims.horizon;
    let constants = cx.settings.constants;
    let d = cx.features.dim();
    let m_max = constants.max_search_level();

    let mut pairs = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let p = cx.env.occupancy_oracle(pi, cx.phase, h)?;
        let x = feature_oracle(cx.features, values.v_row(h + 1), horizon)?;
        pairs.push((p, x));
    }

    let mut prev = vec![vec![0.0; d]; horizon];
    let mut cur = vec![vec![0.0; d]; horizon];
    let mut m = 1u32;
    let mut cost = 0;
    let mut failed = false;
    let mut degenerate = false;
    let threshold = |m: u32| (2.0f64).powi(2 - m as i32);
    while (0..horizon).all(|h| ridges[h].inverse_norm(&prev[h]) < threshold(m)) {
        if m >= m_max {
            degenerate = true;
            break;
        }
        m += 1;
        let accuracy = (2.0f64).powi(-(m as i32));
        let mut next = Vec::with_capacity(horizon);
        for (p, x) in &pairs {
            let report = mean_estimate(
                p,
                x,
                accuracy,
                cx.delta,
                constants.c_mean,
                cx.settings.noise,
                ledger,
                cx.charge(Purpose::FeatureEstimation),
                rng,
            )?;
            cost += report.cost;
            failed |= report.failed;
            next.push(report.estimate);
        }
        prev = std::mem::replace(&mut cur, next);
    }

    let (argmax_step, mut w) = (0..horizon)
        .map(|h| (h, ridges[h].inverse_norm(&cur[h])))
        .fold(
            (0, f64::NEG_INFINITY),
            |best, x| if x.1 > best.1 { x } else { best },
        );
    // A degenerate search, or estimates that all landed on zero, would leave
    // no usable weight.
    if degenerate || w < constants.epsilon_floor {
        w = w.max(constants.epsilon_floor);
    }
    Ok(FeatureEstimates {
        phi_hat: cur,
        w,
        argmax_step,
        level: m,
        degenerate,
        failed,
        cost,
    })
}

/// Estimate `y_h ≈ E_{π}[V_{h+1}(s_{h+1})]` to accuracy `w` for every step.
pub fn estimate_targets<R: Rng + ?Sized>(
    cx: &EstimationContext<'_, '_>,
    pi: &Policy,
    values: &ValueTable,
    w: f64,
    ledger: &mut EpisodeLedger,
    rng: &mut R,
) -> Result<TargetEstimates> {
    if w.is_nan() || w <= 0.0 {
        return Err(Error::Config(format!(
            "target accuracy must be positive, got {w}"
        )));
    }
    let horizon = cx.env.dims().horizon;
    let cap = horizon as f64;
    let mut y = Vec::with_capacity(horizon);
    let mut raw = Vec::with_capacity(horizon);
    let mut cost = 0;
    let mut failed = false;
    for h in 0..horizon {
        let p = cx.env.next_state_oracle(pi, cx.phase, h)?;
        let x = cx.env.value_oracle(values.v_row(h + 1), cap)?;
        let report = mean_estimate(
            &p,
            &x,
            w,
            cx.delta,
            cx.settings.constants.c_mean,
            cx.settings.noise,
            ledger,
            cx.charge(Purpose::TargetEstimation),
            rng,
        )?;
        cost += report.cost;
        failed |= report.failed;
        raw.push(report.estimate[0]);
        y.push(report.estimate[0].clamp(0.0, cap));
    }
    Ok(TargetEstimates {
        y,
        raw,
        failed,
        cost,
    })
}

/// `K_cap = ⌈c_K·d·H·ln(1 + T³/d)⌉`.
pub fn phase_cap(dim: usize, horizon: usize, settings: &RunSettings) -> u64 {
    let d = dim as f64;
    let t = settings.episodes as f64;
    (settings.constants.c_k * d * horizon as f64 * (1.0 + t.powi(3) / d).ln())
        .ceil()
        .max(1.0) as u64
}

/// Per mean-estimation failure probability `δ / (4·H·K_cap)`.
pub fn estimate_delta(dim: usize, horizon: usize, settings: &RunSettings) -> f64 {
    settings.delta / (4.0 * horizon as f64 * phase_cap(dim, horizon, settings) as f64)
}

/// Ground-truth measurements for one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct VtrPhaseDiagnostics {
    pub phase: u64,
    pub beta: f64,
    /// `V_1^k(s_1)` of the optimistic plan.
    pub optimistic_value: f64,
    /// `‖θ̄_h - θ_h‖_{Λ_h}` per step at planning time.
    pub coverage: Vec<f64>,
    /// `max_h ‖φ_h^k‖_{Λ_h⁻¹}` for the true expected features.
    pub true_feature_width: f64,
    /// Present once feature estimation completed.
    pub features: Option<FeatureEstimates>,
    /// `‖φ̂_h - φ_h‖₂` per step.
    pub feature_error: Vec<f64>,
    pub targets: Option<TargetEstimates>,
    /// `|y_h - φ_hᵀθ_h|` per step, using the clamped targets.
    pub target_error: Vec<f64>,
    /// `|raw y_h - φ_hᵀθ_h|` per step, before clamping.
    pub raw_target_error: Vec<f64>,
    pub det_before: Vec<f64>,
    /// Empty unless the regression was updated.
    pub det_after: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtrDiagnostics {
    pub phases: Vec<VtrPhaseDiagnostics>,
    pub optimal_value: f64,
    pub phase_cap: u64,
    pub estimate_delta: f64,
}

#[derive(Debug, Clone)]
pub struct VtrRun {
    pub trace: RunTrace,
    pub ledger: EpisodeLedger,
    pub ridges: Vec<RidgeState>,
    pub diagnostics: VtrDiagnostics,
}

fn true_features(
    tab: &TabularMdp,
    features: &FeatureMap,
    pi: &Policy,
    values: &ValueTable,
) -> Result<Vec<Vec<f64>>> {
    let dims = tab.dims();
    let mut out = Vec::with_capacity(dims.horizon);
    for h in 0..dims.horizon {
        let occ = occupancy_measure(tab, pi, h)?;
        let mut phi = vec![0.0; features.dim()];
        for s in 0..dims.states {
            for a in 0..dims.actions {
                let w = occ[s * dims.actions + a];
                if w != 0.0 {
                    for (acc, x) in phi
                        .iter_mut()
                        .zip(features.phi_v(values.v_row(h + 1), s, a))
                    {
                        *acc += w * x;
                    }
                }
            }
        }
        out.push(phi);
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Run Quantum UCRL-VTR until the episode budget closes.
pub fn run_quantum_ucrl_vtr<R: Rng + ?Sized>(
    mdp: &LinearMixtureMdp,
    settings: &RunSettings,
    rng: &mut R,
) -> Result<VtrRun> {
    settings.validate()?;
    let tab = mdp.to_tabular()?;
    let env = SimulatedEnvironment::new(&tab);
    let dims = mdp.dims();
    let d = mdp.dim();
    let horizon = dims.horizon;
    let s1 = mdp.initial_state();
    let (optimal, _) = optimal_values(&tab);
    let v_star = optimal.v(0, s1);
    let lambda = settings.constants.lambda;

    let mut ridges = (0..horizon)
        .map(|_| RidgeState::new(d, lambda))
        .collect::<Result<Vec<_>>>()?;
    let delta = estimate_delta(d, horizon, settings);
    let mut diagnostics = VtrDiagnostics {
        phases: Vec::new(),
        optimal_value: v_star,
        phase_cap: phase_cap(d, horizon, settings),
        estimate_delta: delta,
    };
    let mut ledger = EpisodeLedger::new(settings.episodes);
    let mut trace = RunTrace::new();

    let mut k = 1u64;
    while !ledger.is_closed() {
        let beta = confidence_radius(lambda, d, k);
        let ellipsoids: Vec<_> = ridges.iter().map(|r| r.ellipsoid(beta)).collect();
        let (values, pi) =
            optimistic_planning(mdp.features(), mdp.rewards(), horizon, &ellipsoids)?;
        let regret = v_star - policy_evaluation(&tab, &pi)?.v(0, s1);

        let truth = true_features(&tab, mdp.features(), &pi, &values)?;
        let true_targets: Vec<f64> = (0..horizon).map(|h| dot(&truth[h], mdp.theta(h))).collect();
        let det_before: Vec<f64> = ridges.iter().map(RidgeState::determinant).collect();
        let mut diag = VtrPhaseDiagnostics {
            phase: k,
            beta,
            optimistic_value: values.v(0, s1),
            coverage: (0..horizon)
                .map(|h| ellipsoids[h].distance(mdp.theta(h)))
                .collect(),
            true_feature_width: (0..horizon)
                .map(|h| ridges[h].inverse_norm(&truth[h]))
                .fold(0.0, f64::max),
            features: None,
            feature_error: Vec::new(),
            targets: None,
            target_error: Vec::new(),
            raw_target_error: Vec::new(),
            det_before: det_before.clone(),
            det_after: Vec::new(),
        };
        let mut columns = VtrColumns {
            w_k: None,
            beta_k: beta,
            feature_cost: 0,
            target_cost: 0,
            det_lambda_min: det_before.iter().copied().fold(f64::INFINITY, f64::min),
            degenerate: false,
        };

        let cx = EstimationContext {
            env: &env,
            features: mdp.features(),
            settings,
            delta,
            phase: k,
        };
        let start = ledger.consumed();
        let mut complete = false;
        match estimate_features(&cx, &pi, &values, &ridges, &mut ledger, rng) {
            Ok(f) => {
                columns.w_k = Some(f.w);
                columns.feature_cost = f.cost;
                columns.degenerate = f.degenerate;
                diag.feature_error = (0..horizon)
                    .map(|h| l2_dist(&f.phi_hat[h], &truth[h]))
                    .collect();
                let after_features = ledger.consumed();
                match estimate_targets(&cx, &pi, &values, f.w, &mut ledger, rng) {
                    Ok(t) => {
                        columns.target_cost = t.cost;
                        diag.target_error = (0..horizon)
                            .map(|h| (t.y[h] - true_targets[h]).abs())
                            .collect();
                        diag.raw_target_error = (0..horizon)
                            .map(|h| (t.raw[h] - true_targets[h]).abs())
                            .collect();
                        for (h, ridge) in ridges.iter_mut().enumerate() {
                            ridge.update(&f.phi_hat[h], t.y[h], f.w)?;
                        }
                        diag.det_after = ridges.iter().map(RidgeState::determinant).collect();
                        diag.targets = Some(t);
                        complete = true;
                    }
                    Err(Error::BudgetExhausted { .. }) => {
                        columns.target_cost = ledger.consumed() - after_features;
                    }
                    Err(e) => return Err(e),
                }
                diag.features = Some(f);
            }
            Err(Error::BudgetExhausted { .. }) => {
                columns.feature_cost = ledger.consumed() - start;
            }
            Err(e) => return Err(e),
        }
        let updates = if complete { k } else { k - 1 };
        trace.record_phase(
            ledger.consumed() - start,
            regret,
            updates,
            complete,
            Some(columns),
        );
        diagnostics.phases.push(diag);
        if !complete {
            break;
        }
        k += 1;
    }
    Ok(VtrRun {
        trace,
        ledger,
        ridges,
        diagnostics,
    })
}
