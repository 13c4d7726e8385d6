//! Quantum UCRL for tabular episodic MDPs.
//!
//! Each phase runs one episode per step `h`: a CSQA draw of `s_h` under the
//! current policy followed by one transition-oracle sample at `(s_h, a_h)`.
//! Samples accumulate per `(h, s, a)` and are spent on a single amplitude
//! estimation whenever the visit count reaches a power of two.

use rand::Rng;

use crate::mdp::{optimal_values, policy_evaluation, Dims, Policy, TabularMdp, ValueTable};
use crate::oracle::{
    amplitude_estimate, ChargeContext, EpisodeLedger, Purpose, SimulatedEnvironment,
};
use crate::params::RunSettings;
use crate::trace::RunTrace;
use crate::{Error, Result};

/// Visit counters, doubling tags and unspent sample buffers per `(h, s, a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterState {
    dims: Dims,
    pub(crate) n: Vec<u64>,
    l: Vec<u32>,
    buffered: Vec<u64>,
}

impl CounterState {
    pub fn new(dims: Dims) -> Self {
        let len = dims.triples();
        Self {
            dims,
            n: vec![0; len],
            l: vec![0; len],
            buffered: vec![0; len],
        }
    }

    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.n[self.dims.sa(h, s, a)]
    }

    /// Number of re-estimations performed at `(h, s, a)`.
    pub fn tag(&self, h: usize, s: usize, a: usize) -> u32 {
        self.l[self.dims.sa(h, s, a)]
    }

    /// Quantum samples collected since the last re-estimation.
    pub fn buffered(&self, h: usize, s: usize, a: usize) -> u64 {
        self.buffered[self.dims.sa(h, s, a)]
    }

    /// Record one sample; returns the buffer size to re-estimate from when
    /// the count has just hit `2^l`.
    fn record(&mut self, i: usize) -> Option<u64> {
        self.n[i] += 1;
        self.buffered[i] += 1;
        if self.n[i] == 1u64 << self.l[i] {
            let used = self.buffered[i];
            self.l[i] += 1;
            self.buffered[i] = 0;
            Some(used)
        } else {
            None
        }
    }
}

/// Estimated transition rows, uniform until first estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEstimate {
    dims: Dims,
    p_hat: Vec<f64>,
    n_used: Vec<u64>,
    last_epsilon: Vec<f64>,
}

impl ModelEstimate {
    pub fn uniform(dims: Dims) -> Self {
        Self {
            dims,
            p_hat: vec![1.0 / dims.states as f64; dims.triples() * dims.states],
            n_used: vec![0; dims.triples()],
            last_epsilon: vec![2.0; dims.triples()],
        }
    }

    /// Build from explicit rows `[h][s][a][s']`, e.g. the true kernel.
    pub fn from_rows(dims: Dims, p_hat: Vec<f64>) -> Result<Self> {
        if p_hat.len() != dims.triples() * dims.states {
            return Err(Error::Dimension(format!(
                "expected {} transition entries, got {}",
                dims.triples() * dims.states,
                p_hat.len()
            )));
        }
        for row in p_hat.chunks(dims.states) {
            crate::mdp::check_distribution(row, 1e-10).map_err(Error::InvalidModel)?;
        }
        Ok(Self {
            dims,
            p_hat,
            n_used: vec![0; dims.triples()],
            last_epsilon: vec![2.0; dims.triples()],
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let i = self.dims.sa(h, s, a) * self.dims.states;
        &self.p_hat[i..i + self.dims.states]
    }

    /// Samples behind the current row (`ñ`); 0 while still uniform.
    pub fn samples_used(&self, h: usize, s: usize, a: usize) -> u64 {
        self.n_used[self.dims.sa(h, s, a)]
    }

    /// Guaranteed ℓ₁ radius of the current row.
    pub fn epsilon(&self, h: usize, s: usize, a: usize) -> f64 {
        self.last_epsilon[self.dims.sa(h, s, a)]
    }

    /// Classical frequency estimate, which carries no guaranteed radius.
    pub(crate) fn set_row(&mut self, i: usize, row: &[f64], used: u64) {
        self.replace(i, row, used, 2.0);
    }

    fn replace(&mut self, i: usize, row: &[f64], used: u64, epsilon: f64) {
        let s = self.dims.states;
        self.p_hat[i * s..(i + 1) * s].copy_from_slice(row);
        self.n_used[i] = used;
        self.last_epsilon[i] = epsilon;
    }
}

/// Optimistic `Q`, `V` and the bonus that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticValues {
    pub values: ValueTable,
    /// `[h][s][a]`
    pub bonus: Vec<f64>,
}

impl OptimisticValues {
    pub fn greedy_policy(&self) -> Policy {
        Policy::greedy(&self.values)
    }
}

/// Bonus `min(2·c1·H·S·L / max(1, n), 2H)`.
pub fn bonus(n: u64, states: usize, horizon: usize, log_term: f64, c1: f64) -> f64 {
    let h = horizon as f64;
    (2.0 * c1 * h * states as f64 * log_term / n.max(1) as f64).min(2.0 * h)
}

/// `L = ln(S²·A·H·ln T / δ)`.
pub fn log_term(dims: Dims, settings: &RunSettings) -> f64 {
    let (s, a, h) = (dims.states as f64, dims.actions as f64, dims.horizon as f64);
    (s * s * a * h * settings.ln_t() / settings.delta).ln()
}

/// Confidence given to each amplitude estimation: `δ / (2·S·A·H·log₂ T)`.
pub fn estimate_delta(dims: Dims, settings: &RunSettings) -> f64 {
    settings.delta / (2.0 * dims.triples() as f64 * settings.log2_t())
}

/// `Q_h = min{R_h + P̂_h V_{h+1} + b_h, H}`, `V_h = max_a Q_h`.
pub fn optimistic_value_iteration(
    model: &ModelEstimate,
    rewards: &[f64],
    bonus: &[f64],
) -> OptimisticValues {
    let dims = model.dims();
    assert_eq!(rewards.len(), dims.triples(), "reward table shape");
    assert_eq!(bonus.len(), dims.triples(), "bonus table shape");
    let cap = dims.horizon as f64;
    let mut values = ValueTable::zeros(dims);
    for h in (0..dims.horizon).rev() {
        for s in 0..dims.states {
            for a in 0..dims.actions {
                let i = dims.sa(h, s, a);
                let next: f64 = model
                    .row(h, s, a)
                    .iter()
                    .zip(values.v_row(h + 1))
                    .map(|(p, v)| p * v)
                    .sum();
                values.set_q(h, s, a, (rewards[i] + next + bonus[i]).min(cap));
            }
        }
        values.set_v_greedy(h);
    }
    OptimisticValues {
        values,
        bonus: bonus.to_vec(),
    }
}

/// One re-estimation of a transition row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReestimationEvent {
    pub phase: u64,
    pub h: usize,
    pub s: usize,
    pub a: usize,
    /// Visit count `n` when the estimate was made.
    pub visits: u64,
    /// Samples the estimate used (`ñ`).
    pub samples_used: u64,
    pub epsilon: f64,
    pub failed: bool,
}

/// Ground-truth checks gathered while a run executes. They never feed back
/// into the learner.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TabularDiagnostics {
    pub reestimations: Vec<ReestimationEvent>,
    /// `(phase, V_1^k(s_1))` for every planned policy.
    pub optimistic_values: Vec<(u64, f64)>,
    /// Largest `‖P̂ - P‖₁ / min(2·c1·S·L/n, 2)` seen after any visit.
    pub max_model_error_ratio: f64,
    /// Visits after which `‖P̂ - P‖₁` exceeded `min(2·c1·S·L/n, 2)`.
    pub model_bound_violations: u64,
    pub optimal_value: f64,
    pub log_term: f64,
}

/// Everything a tabular or classical-tabular run produces.
#[derive(Debug, Clone)]
pub struct TabularRun {
    pub trace: RunTrace,
    pub ledger: EpisodeLedger,
    pub counters: CounterState,
    pub model: ModelEstimate,
    pub diagnostics: TabularDiagnostics,
}

/// Quantum UCRL learner state between phases.
#[derive(Debug, Clone)]
pub struct QuantumUcrl<'a> {
    mdp: &'a TabularMdp,
    settings: RunSettings,
    counters: CounterState,
    model: ModelEstimate,
    log_term: f64,
    delta_prime: f64,
    updates: u64,
    diagnostics: TabularDiagnostics,
}

impl<'a> QuantumUcrl<'a> {
    pub fn new(mdp: &'a TabularMdp, settings: RunSettings) -> Result<Self> {
        settings.validate()?;
        let dims = mdp.dims();
        if settings.episodes < dims.horizon as u64 {
            return Err(Error::Config(format!(
                "episode budget {} is shorter than the horizon {}",
                settings.episodes, dims.horizon
            )));
        }
        let log_term = log_term(dims, &settings);
        Ok(Self {
            mdp,
            settings,
            counters: CounterState::new(dims),
            model: ModelEstimate::uniform(dims),
            log_term,
            delta_prime: estimate_delta(dims, &settings),
            updates: 0,
            diagnostics: TabularDiagnostics {
                log_term,
                ..TabularDiagnostics::default()
            },
        })
    }

    pub fn counters(&self) -> &CounterState {
        &self.counters
    }

    pub fn model(&self) -> &ModelEstimate {
        &self.model
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn log_term(&self) -> f64 {
        self.log_term
    }

    /// Collect one sample per step under `pi`. Returns the episodes consumed;
    /// fewer than `H` means the budget closed mid-phase.
    pub fn phase_step<R: Rng + ?Sized>(
        &mut self,
        pi: &Policy,
        phase: u64,
        ledger: &mut EpisodeLedger,
        rng: &mut R,
    ) -> Result<u64> {
        let env = SimulatedEnvironment::new(self.mdp);
        let dims = self.mdp.dims();
        let ctx = ChargeContext {
            phase,
            policy_id: phase,
            purpose: Purpose::Csqa,
        };
        let mut used = 0;
        for h in 0..dims.horizon {
            let s = match env.csqa_sample(pi, h, ledger, ctx, rng) {
                Ok(s) => s,
                Err(Error::BudgetExhausted { .. }) => break,
                Err(e) => return Err(e),
            };
            used += 1;
            let a = pi.sample_action(h, s, rng);
            let i = dims.sa(h, s, a);
            if let Some(samples) = self.counters.record(i) {
                let oracle = env.transition_oracle(h, s, a);
                let report = amplitude_estimate(
                    &oracle,
                    samples,
                    self.delta_prime,
                    self.settings.constants.c_amp,
                    self.settings.noise,
                    rng,
                )?;
                self.model
                    .replace(i, &report.estimate, samples, report.epsilon);
                self.updates += 1;
                self.diagnostics.reestimations.push(ReestimationEvent {
                    phase,
                    h,
                    s,
                    a,
                    visits: self.counters.n[i],
                    samples_used: samples,
                    epsilon: report.epsilon,
                    failed: report.failed,
                });
            }
            self.check_model_row(h, s, a);
        }
        Ok(used)
    }

    fn check_model_row(&mut self, h: usize, s: usize, a: usize) {
        let n = self.counters.visits(h, s, a);
        if self.counters.tag(h, s, a) == 0 {
            return;
        }
        let dims = self.mdp.dims();
        let err: f64 = self
            .model
            .row(h, s, a)
            .iter()
            .zip(self.mdp.transition(h, s, a))
            .map(|(x, y)| (x - y).abs())
            .sum();
        let c1 = self.settings.constants.c1;
        let bound = (2.0 * c1 * dims.states as f64 * self.log_term / n as f64).min(2.0);
        let ratio = err / bound;
        if ratio > self.diagnostics.max_model_error_ratio {
            self.diagnostics.max_model_error_ratio = ratio;
        }
        if err > bound + 1e-12 {
            self.diagnostics.model_bound_violations += 1;
        }
    }

    /// Optimistic planning from the current counts and model.
    pub fn plan(&self) -> OptimisticValues {
        let dims = self.mdp.dims();
        let c1 = self.settings.constants.c1;
        let b: Vec<f64> = self
            .counters
            .n
            .iter()
            .map(|&n| bonus(n, dims.states, dims.horizon, self.log_term, c1))
            .collect();
        optimistic_value_iteration(&self.model, self.mdp.rewards(), &b)
    }

    fn finish(self, trace: RunTrace, ledger: EpisodeLedger) -> TabularRun {
        TabularRun {
            trace,
            ledger,
            counters: self.counters,
            model: self.model,
            diagnostics: self.diagnostics,
        }
    }
}

/// Run Quantum UCRL for `settings.episodes` episodes.
///
/// The first policy is uniform; afterwards each phase plays the greedy policy
/// of the optimistic values computed at the end of the previous phase.
pub fn run_quantum_ucrl<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    settings: &RunSettings,
    rng: &mut R,
) -> Result<TabularRun> {
    let mut learner = QuantumUcrl::new(mdp, *settings)?;
    let (optimal, _) = optimal_values(mdp);
    let s1 = mdp.initial_state();
    let v_star = optimal.v(0, s1);
    learner.diagnostics.optimal_value = v_star;

    let mut ledger = EpisodeLedger::new(settings.episodes);
    let mut trace = RunTrace::new();
    let mut pi = Policy::uniform(mdp.dims());
    let horizon = mdp.horizon() as u64;
    let mut phase = 1;
    while !ledger.is_closed() {
        let regret = v_star - policy_evaluation(mdp, &pi)?.v(0, s1);
        let used = learner.phase_step(&pi, phase, &mut ledger, rng)?;
        trace.record_phase(used, regret, learner.updates, used == horizon, None);
        if used < horizon {
            break;
        }
        let planned = learner.plan();
        learner
            .diagnostics
            .optimistic_values
            .push((phase + 1, planned.values.v(0, s1)));
        pi = planned.greedy_policy();
        phase += 1;
    }
    Ok(learner.finish(trace, ledger))
}
