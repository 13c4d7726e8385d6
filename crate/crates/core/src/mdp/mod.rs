//! Finite episodic MDPs, policies and exact dynamic programming.
//!
//! Steps are 0-based throughout the crate: a horizon-`H` MDP has steps
//! `0..H`, and value tables carry an extra terminal row `V[H] = 0`.

mod dp;
pub mod envfile;
pub mod generate;
mod linmix;

pub use dp::{
    next_state_distribution, occupancy_measure, optimal_values, policy_evaluation, state_occupancy,
    value_decomposition_residual,
};
pub use linmix::{FeatureMap, LinearMixtureMdp};

use rand::Rng;

use crate::{Error, Result};

/// Tolerance on probability inputs (row sums, nonnegativity).
pub const INPUT_TOL: f64 = 1e-12;
/// Tolerance on derived probabilities.
pub const DERIVED_TOL: f64 = 1e-10;

/// Sizes shared by every table indexed by `(h, s, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Result<Self> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(Error::Config(format!(
                "states, actions and horizon must be positive (got S={states}, A={actions}, H={horizon})"
            )));
        }
        Ok(Self {
            states,
            actions,
            horizon,
        })
    }

    #[inline]
    pub fn sa(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    #[inline]
    pub fn hs(&self, h: usize, s: usize) -> usize {
        h * self.states + s
    }

    /// Number of `(h, s, a)` triples.
    pub fn triples(&self) -> usize {
        self.horizon * self.states * self.actions
    }

    pub(crate) fn check_step(&self, h: usize) -> Result<()> {
        if h >= self.horizon {
            Err(Error::StepOutOfRange {
                step: h,
                horizon: self.horizon,
            })
        } else {
            Ok(())
        }
    }
}

pub(crate) fn check_distribution(row: &[f64], tol: f64) -> std::result::Result<(), String> {
    if let Some((i, p)) = row
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < -tol)
    {
        return Err(format!("entry {i} is {p}"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// Draw an index from a probability row by inverse CDF.
pub(crate) fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // round-off: last index with positive mass
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

/// Tabular episodic MDP with known deterministic rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    dims: Dims,
    /// `[h][s][a][s']`
    transitions: Vec<f64>,
    /// `[h][s][a]`
    rewards: Vec<f64>,
    initial_state: usize,
}

impl TabularMdp {
    pub fn new(
        dims: Dims,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial_state: usize,
    ) -> Result<Self> {
        let n = dims.triples();
        if transitions.len() != n * dims.states {
            return Err(Error::Dimension(format!(
                "transition tensor has {} entries, expected H*S*A*S = {}",
                transitions.len(),
                n * dims.states
            )));
        }
        if rewards.len() != n {
            return Err(Error::Dimension(format!(
                "reward tensor has {} entries, expected H*S*A = {n}",
                rewards.len()
            )));
        }
        if initial_state >= dims.states {
            return Err(Error::InvalidModel(format!(
                "initial state {initial_state} outside 0..{}",
                dims.states
            )));
        }
        for (i, row) in transitions.chunks(dims.states).enumerate() {
            check_distribution(row, INPUT_TOL).map_err(|e| {
                let (h, s, a) = unflatten(dims, i);
                Error::InvalidModel(format!("P[h={h}][s={s}][a={a}] {e}"))
            })?;
        }
        if let Some((i, r)) = rewards
            .iter()
            .enumerate()
            .find(|(_, r)| !(0.0..=1.0).contains(*r))
        {
            let (h, s, a) = unflatten(dims, i);
            return Err(Error::InvalidModel(format!(
                "R[h={h}][s={s}][a={a}] = {r} outside [0, 1]"
            )));
        }
        Ok(Self {
            dims,
            transitions,
            rewards,
            initial_state,
        })
    }

    /// Build from closures over `(h, s, a)`.
    pub fn from_fn(
        dims: Dims,
        initial_state: usize,
        mut transition: impl FnMut(usize, usize, usize) -> Vec<f64>,
        mut reward: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut p = Vec::with_capacity(dims.triples() * dims.states);
        let mut r = Vec::with_capacity(dims.triples());
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    let row = transition(h, s, a);
                    if row.len() != dims.states {
                        return Err(Error::Dimension(format!(
                            "transition row ({h},{s},{a}) has {} entries, expected {}",
                            row.len(),
                            dims.states
                        )));
                    }
                    p.extend(row);
                    r.push(reward(h, s, a));
                }
            }
        }
        Self::new(dims, p, r, initial_state)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn states(&self) -> usize {
        self.dims.states
    }

    pub fn actions(&self) -> usize {
        self.dims.actions
    }

    pub fn horizon(&self) -> usize {
        self.dims.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn transition(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let i = self.dims.sa(h, s, a) * self.dims.states;
        &self.transitions[i..i + self.dims.states]
    }

    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[self.dims.sa(h, s, a)]
    }

    /// Reward table indexed `[h][s][a]`.
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// `(P_h V)(s, a)`.
    pub fn expected_next(&self, h: usize, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transition(h, s, a)
            .iter()
            .zip(v)
            .map(|(p, v)| p * v)
            .sum()
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, h: usize, s: usize, a: usize, rng: &mut R) -> usize {
        sample_index(self.transition(h, s, a), rng)
    }

    /// Same dynamics with every reward set to zero.
    pub fn with_zero_rewards(&self) -> Self {
        Self {
            rewards: vec![0.0; self.rewards.len()],
            ..self.clone()
        }
    }
}

fn unflatten(dims: Dims, i: usize) -> (usize, usize, usize) {
    let a = i % dims.actions;
    let s = (i / dims.actions) % dims.states;
    let h = i / (dims.actions * dims.states);
    (h, s, a)
}

/// Markov policy: one action distribution per `(h, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    dims: Dims,
    /// `[h][s][a]`
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(dims: Dims, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != dims.triples() {
            return Err(Error::Dimension(format!(
                "policy table has {} entries, expected H*S*A = {}",
                probs.len(),
                dims.triples()
            )));
        }
        for (i, row) in probs.chunks(dims.actions).enumerate() {
            check_distribution(row, INPUT_TOL).map_err(|e| {
                Error::InvalidModel(format!(
                    "policy row (h={}, s={}) {e}",
                    i / dims.states,
                    i % dims.states
                ))
            })?;
        }
        Ok(Self { dims, probs })
    }

    pub fn uniform(dims: Dims) -> Self {
        let p = 1.0 / dims.actions as f64;
        Self {
            dims,
            probs: vec![p; dims.triples()],
        }
    }

    /// Point-mass policy from an action choice per `(h, s)`, indexed `[h][s]`.
    pub fn deterministic(dims: Dims, choices: &[usize]) -> Result<Self> {
        if choices.len() != dims.horizon * dims.states {
            return Err(Error::Dimension(format!(
                "expected {} action choices, got {}",
                dims.horizon * dims.states,
                choices.len()
            )));
        }
        let mut probs = vec![0.0; dims.triples()];
        for (i, &a) in choices.iter().enumerate() {
            if a >= dims.actions {
                return Err(Error::InvalidModel(format!(
                    "action {a} outside 0..{}",
                    dims.actions
                )));
            }
            probs[i * dims.actions + a] = 1.0;
        }
        Ok(Self { dims, probs })
    }

    /// Greedy policy with respect to `q`, ties broken towards the lowest action index.
    pub fn greedy(q: &ValueTable) -> Self {
        let dims = q.dims();
        let choices: Vec<usize> = (0..dims.horizon)
            .flat_map(|h| (0..dims.states).map(move |s| (h, s)))
            .map(|(h, s)| argmax(q.q_row(h, s)))
            .collect();
        Self::deterministic(dims, &choices).expect("argmax is in range")
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn probs(&self, h: usize, s: usize) -> &[f64] {
        let i = self.dims.hs(h, s) * self.dims.actions;
        &self.probs[i..i + self.dims.actions]
    }

    /// Most likely action; for deterministic policies, the action taken.
    pub fn action(&self, h: usize, s: usize) -> usize {
        argmax(self.probs(h, s))
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|p| *p == 0.0 || *p == 1.0)
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, h: usize, s: usize, rng: &mut R) -> usize {
        let row = self.probs(h, s);
        match row.iter().position(|p| *p == 1.0) {
            Some(a) => a,
            None => sample_index(row, rng),
        }
    }

    pub(crate) fn check_dims(&self, dims: Dims) -> Result<()> {
        if self.dims != dims {
            Err(Error::Dimension(format!(
                "policy dims {:?} do not match MDP dims {:?}",
                self.dims, dims
            )))
        } else {
            Ok(())
        }
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// State values `V[h][s]` for `h in 0..=H` and action values `Q[h][s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    dims: Dims,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTable {
    /// All-zero table, including the terminal row.
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            v: vec![0.0; (dims.horizon + 1) * dims.states],
            q: vec![0.0; dims.triples()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[self.dims.hs(h, s)]
    }

    /// State values at step `h`; `h == H` is the terminal zero row.
    pub fn v_row(&self, h: usize) -> &[f64] {
        let i = h * self.dims.states;
        &self.v[i..i + self.dims.states]
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.dims.sa(h, s, a)]
    }

    pub fn q_row(&self, h: usize, s: usize) -> &[f64] {
        let i = self.dims.hs(h, s) * self.dims.actions;
        &self.q[i..i + self.dims.actions]
    }

    pub fn set_q(&mut self, h: usize, s: usize, a: usize, value: f64) {
        let i = self.dims.sa(h, s, a);
        self.q[i] = value;
    }

    pub fn set_v(&mut self, h: usize, s: usize, value: f64) {
        let i = self.dims.hs(h, s);
        self.v[i] = value;
    }

    /// Set `V_h(s) = max_a Q_h(s, a)` for every state at step `h`.
    pub fn set_v_greedy(&mut self, h: usize) {
        for s in 0..self.dims.states {
            let best = self
                .q_row(h, s)
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            self.set_v(h, s, best);
        }
    }
}
