use rand::Rng;

use super::{Dims, TabularMdp, DERIVED_TOL, INPUT_TOL};
use crate::{Error, Result};

/// Largest state count for which the feature bound is checked exactly by
/// enumerating the vertices of `[0, 1]^S`.
const EXACT_BOUND_MAX_STATES: usize = 16;
const SAMPLED_BOUND_DRAWS: usize = 4096;

/// Known feature map `ψ(s, a, s') ∈ R^d` of a linear mixture MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    states: usize,
    actions: usize,
    dim: usize,
    /// `[s][a][s'][i]`
    psi: Vec<f64>,
}

impl FeatureMap {
    pub fn new(states: usize, actions: usize, dim: usize, psi: Vec<f64>) -> Result<Self> {
        if states == 0 || actions == 0 || dim == 0 {
            return Err(Error::Config("feature map sizes must be positive".into()));
        }
        let expect = states * actions * states * dim;
        if psi.len() != expect {
            return Err(Error::Dimension(format!(
                "feature tensor has {} entries, expected S*A*S*d = {expect}",
                psi.len()
            )));
        }
        if psi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel(
                "feature tensor has non-finite entries".into(),
            ));
        }
        Ok(Self {
            states,
            actions,
            dim,
            psi,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn psi(&self, s: usize, a: usize, next: usize) -> &[f64] {
        let i = ((s * self.actions + a) * self.states + next) * self.dim;
        &self.psi[i..i + self.dim]
    }

    /// `φ_V(s, a) = Σ_{s'} ψ(s, a, s') V(s')`.
    pub fn phi_v(&self, v: &[f64], s: usize, a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.phi_v_into(v, s, a, &mut out);
        out
    }

    pub fn phi_v_into(&self, v: &[f64], s: usize, a: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (next, &vn) in v.iter().enumerate().take(self.states) {
            if vn == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.psi(s, a, next)) {
                *o += p * vn;
            }
        }
    }

    /// Transition probability `ψ(s, a, s')ᵀθ`.
    pub fn probability(&self, theta: &[f64], s: usize, a: usize, next: usize) -> f64 {
        self.psi(s, a, next)
            .iter()
            .zip(theta)
            .map(|(p, t)| p * t)
            .sum()
    }

    /// `max_{V ∈ [0,1]^S, (s,a)} ‖φ_V(s, a)‖₂`.
    ///
    /// Exact for small state spaces (the squared norm is convex in `V`, so the
    /// maximum sits on a vertex of the cube); sampled otherwise.
    pub fn max_feature_norm<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut best: f64 = 0.0;
        let mut v = vec![0.0; self.states];
        let mut phi = vec![0.0; self.dim];
        let mut probe = |v: &[f64], best: &mut f64| {
            for s in 0..self.states {
                for a in 0..self.actions {
                    self.phi_v_into(v, s, a, &mut phi);
                    *best = best.max(norm(&phi));
                }
            }
        };
        if self.states <= EXACT_BOUND_MAX_STATES {
            for mask in 0u32..(1u32 << self.states) {
                for (i, x) in v.iter_mut().enumerate() {
                    *x = f64::from((mask >> i) & 1);
                }
                probe(&v, &mut best);
            }
        } else {
            for _ in 0..SAMPLED_BOUND_DRAWS {
                for x in v.iter_mut() {
                    *x = if rng.random::<bool>() { 1.0 } else { 0.0 };
                }
                probe(&v, &mut best);
            }
        }
        best
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Linear mixture MDP: `P_h(s' | s, a) = ψ(s, a, s')ᵀθ_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMixtureMdp {
    dims: Dims,
    features: FeatureMap,
    /// `[h][i]`
    thetas: Vec<f64>,
    rewards: Vec<f64>,
    initial_state: usize,
}

impl LinearMixtureMdp {
    /// Assemble without checking that the parameters define valid transitions.
    /// [`LinearMixtureMdp::to_tabular`] and [`LinearMixtureMdp::new`] validate.
    pub fn from_parts(
        horizon: usize,
        features: FeatureMap,
        thetas: Vec<Vec<f64>>,
        rewards: Vec<f64>,
        initial_state: usize,
    ) -> Result<Self> {
        let dims = Dims::new(features.states, features.actions, horizon)?;
        if thetas.len() != horizon || thetas.iter().any(|t| t.len() != features.dim) {
            return Err(Error::Dimension(format!(
                "expected {horizon} parameter vectors of length {}",
                features.dim
            )));
        }
        if rewards.len() != dims.triples() {
            return Err(Error::Dimension(format!(
                "reward tensor has {} entries, expected H*S*A = {}",
                rewards.len(),
                dims.triples()
            )));
        }
        if rewards.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidModel("rewards must lie in [0, 1]".into()));
        }
        if initial_state >= dims.states {
            return Err(Error::InvalidModel(format!(
                "initial state {initial_state} outside 0..{}",
                dims.states
            )));
        }
        if thetas.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter entries".into()));
        }
        Ok(Self {
            dims,
            features,
            thetas: thetas.into_iter().flatten().collect(),
            rewards,
            initial_state,
        })
    }

    /// Assemble and check every defining constraint: valid transition rows,
    /// `‖θ_h‖₂ ≤ 1` and `‖φ_V(s, a)‖₂ ≤ 1` for `V` with range `[0, 1]`.
    pub fn new<R: Rng + ?Sized>(
        horizon: usize,
        features: FeatureMap,
        thetas: Vec<Vec<f64>>,
        rewards: Vec<f64>,
        initial_state: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mdp = Self::from_parts(horizon, features, thetas, rewards, initial_state)?;
        mdp.validate(rng)?;
        Ok(mdp)
    }

    pub fn validate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<()> {
        for h in 0..self.dims.horizon {
            let n = norm(self.theta(h));
            if n > 1.0 + DERIVED_TOL {
                return Err(Error::InvalidModel(format!("‖θ_{h}‖₂ = {n} exceeds 1")));
            }
            for s in 0..self.dims.states {
                for a in 0..self.dims.actions {
                    let row = self.transition_row(h, s, a);
                    if let Some(p) = row.iter().find(|p| **p < -INPUT_TOL) {
                        return Err(Error::InvalidModel(format!(
                            "P[h={h}][s={s}][a={a}] has negative entry {p}"
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > DERIVED_TOL {
                        return Err(Error::InvalidModel(format!(
                            "P[h={h}][s={s}][a={a}] sums to {sum}"
                        )));
                    }
                }
            }
        }
        let bound = self.features.max_feature_norm(rng);
        if bound > 1.0 + DERIVED_TOL {
            return Err(Error::InvalidModel(format!(
                "max ‖φ_V(s,a)‖₂ over V in [0,1] is {bound}, exceeds 1"
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.features.dim
    }

    pub fn horizon(&self) -> usize {
        self.dims.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn theta(&self, h: usize) -> &[f64] {
        let d = self.features.dim;
        &self.thetas[h * d..(h + 1) * d]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[self.dims.sa(h, s, a)]
    }

    pub fn phi_v(&self, v: &[f64], s: usize, a: usize) -> Vec<f64> {
        self.features.phi_v(v, s, a)
    }

    fn transition_row(&self, h: usize, s: usize, a: usize) -> Vec<f64> {
        (0..self.dims.states)
            .map(|next| self.features.probability(self.theta(h), s, a, next))
            .collect()
    }

    /// Same parameters with every reward set to zero.
    pub fn with_zero_rewards(&self) -> Self {
        Self {
            rewards: vec![0.0; self.rewards.len()],
            ..self.clone()
        }
    }

    /// Materialize `P_h(s' | s, a) = ψ(s, a, s')ᵀθ_h`.
    ///
    /// Rows with entries in `[-1e-9, 0)` are clamped to zero and renormalized;
    /// anything more negative, or a row that does not sum to one, is rejected.
    pub fn to_tabular(&self) -> Result<TabularMdp> {
        let dims = self.dims;
        let mut p = Vec::with_capacity(dims.triples() * dims.states);
        for h in 0..dims.horizon {
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    let mut row = self.transition_row(h, s, a);
                    if let Some(x) = row.iter().find(|x| **x < -1e-9) {
                        return Err(Error::InvalidModel(format!(
                            "ψᵀθ gives P[h={h}][s={s}][a={a}] entry {x}"
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > DERIVED_TOL {
                        return Err(Error::InvalidModel(format!(
                            "ψᵀθ gives P[h={h}][s={s}][a={a}] summing to {sum}"
                        )));
                    }
                    if row.iter().any(|x| *x < 0.0) {
                        row.iter_mut().for_each(|x| *x = x.max(0.0));
                        let z: f64 = row.iter().sum();
                        row.iter_mut().for_each(|x| *x /= z);
                    }
                    p.extend(row);
                }
            }
        }
        TabularMdp::new(dims, p, self.rewards.clone(), self.initial_state)
    }
}
