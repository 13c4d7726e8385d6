//! Classical-sampling comparators.
//!
//! Both baselines see transitions only through full classical rollouts and
//! update their policy after every episode, so they exhibit the usual
//! `√T` regret growth.

use rand::Rng;

use crate::mdp::{optimal_values, policy_evaluation, LinearMixtureMdp, Policy, TabularMdp};
use crate::oracle::{ChargeContext, EpisodeLedger, Purpose, SimulatedEnvironment};
use crate::params::RunSettings;
use crate::tabular::{
    log_term, optimistic_value_iteration, CounterState, ModelEstimate, TabularDiagnostics,
    TabularRun,
};
use crate::trace::RunTrace;
use crate::vtr::{optimistic_planning, RidgeState, VtrDiagnostics, VtrRun};
use crate::{Error, Result};

/// Hoeffding bonus `c1·H·√(S·L / max(1, n))`, capped at `2H`.
pub fn hoeffding_bonus(n: u64, states: usize, horizon: usize, log_term: f64, c1: f64) -> f64 {
    let h = horizon as f64;
    (c1 * h * (states as f64 * log_term / n.max(1) as f64).sqrt()).min(2.0 * h)
}

/// Classical ellipsoid radius `√λ + c1·H·√(d·ln((1 + t)/δ))` for episode `t`.
pub fn classical_radius(
    lambda: f64,
    dim: usize,
    horizon: usize,
    t: u64,
    delta: f64,
    c1: f64,
) -> f64 {
    lambda.sqrt() + c1 * horizon as f64 * (dim as f64 * ((1.0 + t as f64) / delta).ln()).sqrt()
}

/// Caches `V_1^π(s_1)` for the most recent policy; greedy policies change rarely.
struct RegretCache {
    policy: Option<Policy>,
    regret: f64,
}

impl RegretCache {
    fn regret(&mut self, mdp: &TabularMdp, pi: &Policy, v_star: f64) -> Result<f64> {
        if self.policy.as_ref() != Some(pi) {
            self.regret = v_star - policy_evaluation(mdp, pi)?.v(0, mdp.initial_state());
            self.policy = Some(pi.clone());
        }
        Ok(self.regret)
    }
}

fn episode_ctx(t: u64) -> ChargeContext {
    ChargeContext {
        phase: t,
        policy_id: t,
        purpose: Purpose::Rollout,
    }
}

/// UCRL with empirical transition frequencies and a Hoeffding bonus.
pub fn run_classical_ucrl<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    settings: &RunSettings,
    rng: &mut R,
) -> Result<TabularRun> {
    settings.validate()?;
    let dims = mdp.dims();
    let env = SimulatedEnvironment::new(mdp);
    let (optimal, _) = optimal_values(mdp);
    let s1 = mdp.initial_state();
    let v_star = optimal.v(0, s1);
    let l = log_term(dims, settings);
    let c1 = settings.constants.c1;

    let mut counters = CounterState::new(dims);
    let mut next_counts = vec![0u64; dims.triples() * dims.states];
    let mut model = ModelEstimate::uniform(dims);
    let mut diagnostics = TabularDiagnostics {
        optimal_value: v_star,
        log_term: l,
        ..TabularDiagnostics::default()
    };
    let mut ledger = EpisodeLedger::new(settings.episodes);
    let mut trace = RunTrace::new();
    let mut cache = RegretCache {
        policy: None,
        regret: 0.0,
    };
    let mut pi = Policy::uniform(dims);

    for t in 1..=settings.episodes {
        let regret = cache.regret(mdp, &pi, v_star)?;
        let traj = match env.rollout(&pi, &mut ledger, episode_ctx(t), rng) {
            Ok(traj) => traj,
            Err(Error::BudgetExhausted { .. }) => break,
            Err(e) => return Err(e),
        };
        for h in 0..dims.horizon {
            let (s, a, next) = (traj.states[h], traj.actions[h], traj.states[h + 1]);
            let i = dims.sa(h, s, a);
            counters.n[i] += 1;
            next_counts[i * dims.states + next] += 1;
            let n = counters.n[i] as f64;
            let row: Vec<f64> = next_counts[i * dims.states..(i + 1) * dims.states]
                .iter()
                .map(|c| *c as f64 / n)
                .collect();
            model.set_row(i, &row, counters.n[i]);
        }
        trace.record_phase(1, regret, t, true, None);

        let b: Vec<f64> = counters
            .n
            .iter()
            .map(|&n| hoeffding_bonus(n, dims.states, dims.horizon, l, c1))
            .collect();
        let planned = optimistic_value_iteration(&model, mdp.rewards(), &b);
        diagnostics
            .optimistic_values
            .push((t + 1, planned.values.v(0, s1)));
        pi = planned.greedy_policy();
    }
    Ok(TabularRun {
        trace,
        ledger,
        counters,
        model,
        diagnostics,
    })
}

/// UCRL-VTR with realized next-state values as regression targets and
/// unweighted ridge regression.
pub fn run_classical_ucrl_vtr<R: Rng + ?Sized>(
    mdp: &LinearMixtureMdp,
    settings: &RunSettings,
    rng: &mut R,
) -> Result<VtrRun> {
    settings.validate()?;
    let tab = mdp.to_tabular()?;
    let env = SimulatedEnvironment::new(&tab);
    let dims = mdp.dims();
    let (d, horizon) = (mdp.dim(), dims.horizon);
    let s1 = mdp.initial_state();
    let (optimal, _) = optimal_values(&tab);
    let v_star = optimal.v(0, s1);
    let constants = settings.constants;

    let mut ridges = (0..horizon)
        .map(|_| RidgeState::new(d, constants.lambda))
        .collect::<Result<Vec<_>>>()?;
    let mut ledger = EpisodeLedger::new(settings.episodes);
    let mut trace = RunTrace::new();
    let mut cache = RegretCache {
        policy: None,
        regret: 0.0,
    };

    for t in 1..=settings.episodes {
        let beta = classical_radius(
            constants.lambda,
            d,
            horizon,
            t,
            settings.delta,
            constants.c1,
        );
        let ellipsoids: Vec<_> = ridges.iter().map(|r| r.ellipsoid(beta)).collect();
        let (values, pi) =
            optimistic_planning(mdp.features(), mdp.rewards(), horizon, &ellipsoids)?;
        let regret = cache.regret(&tab, &pi, v_star)?;
        let traj = match env.rollout(&pi, &mut ledger, episode_ctx(t), rng) {
            Ok(traj) => traj,
            Err(Error::BudgetExhausted { .. }) => break,
            Err(e) => return Err(e),
        };
        for (h, ridge) in ridges.iter_mut().enumerate() {
            let (s, a, next) = (traj.states[h], traj.actions[h], traj.states[h + 1]);
            let next_values = values.v_row(h + 1);
            let phi = mdp.phi_v(next_values, s, a);
            ridge.update(&phi, next_values[next], 1.0)?;
        }
        trace.record_phase(1, regret, t, true, None);
    }
    Ok(VtrRun {
        trace,
        ledger,
        ridges,
        diagnostics: VtrDiagnostics {
            optimal_value: v_star,
            ..VtrDiagnostics::default()
        },
    })
}
