//! Seeded instance generators.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{Dims, FeatureMap, LinearMixtureMdp, Policy, TabularMdp, ValueTable};

/// Uniform draw from the probability simplex (Dirichlet(1, ..., 1)).
pub fn simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let z: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= z);
    x
}

/// Dirichlet(1) transition rows, uniform rewards, initial state 0.
pub fn random_tabular<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> TabularMdp {
    let mut p = Vec::with_capacity(dims.triples() * dims.states);
    let mut r = Vec::with_capacity(dims.triples());
    for _ in 0..dims.triples() {
        p.extend(simplex_point(dims.states, rng));
        r.push(rng.random::<f64>());
    }
    TabularMdp::new(dims, p, r, 0).expect("generated rows are valid")
}

/// Deterministic chain `s -> min(s + 1, S - 1)` with unit reward on the last state.
pub fn chain(states: usize, horizon: usize) -> TabularMdp {
    let dims = Dims::new(states, 1, horizon).expect("positive sizes");
    TabularMdp::from_fn(
        dims,
        0,
        |_, s, _| {
            let mut row = vec![0.0; states];
            row[(s + 1).min(states - 1)] = 1.0;
            row
        },
        |_, s, _| if s + 1 == states { 1.0 } else { 0.0 },
    )
    .expect("chain is valid")
}

/// Two-state instance where every action leads to the rewarding state with
/// probability 1/2, except the last action which adds `gap`.
///
/// State 1 pays reward 1 and state 0 pays nothing, independent of the action,
/// so the optimal Q-gap at every non-terminal step is exactly `gap`.
pub fn gap_tabular(actions: usize, horizon: usize, gap: f64) -> TabularMdp {
    assert!((0.0..=0.5).contains(&gap), "gap must lie in [0, 1/2]");
    let dims = Dims::new(2, actions, horizon).expect("positive sizes");
    TabularMdp::from_fn(
        dims,
        0,
        |_, _, a| {
            let up = if a + 1 == actions { 0.5 + gap } else { 0.5 };
            vec![1.0 - up, up]
        },
        |_, s, _| s as f64,
    )
    .expect("gap instance is valid")
}

pub fn random_policy<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Policy {
    let probs = (0..dims.horizon * dims.states)
        .flat_map(|_| simplex_point(dims.actions, rng))
        .collect();
    Policy::new(dims, probs).expect("simplex rows are valid")
}

pub fn random_deterministic_policy<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Policy {
    let choices: Vec<usize> = (0..dims.horizon * dims.states)
        .map(|_| rng.random_range(0..dims.actions))
        .collect();
    Policy::deterministic(dims, &choices).expect("choices are in range")
}

/// Arbitrary Q-table with entries uniform in `[0, scale]`.
pub fn random_q<R: Rng + ?Sized>(dims: Dims, scale: f64, rng: &mut R) -> ValueTable {
    let mut q = ValueTable::zeros(dims);
    for h in 0..dims.horizon {
        for s in 0..dims.states {
            for a in 0..dims.actions {
                q.set_q(h, s, a, scale * rng.random::<f64>());
            }
        }
    }
    q
}

fn mixture_from_kernels(dims: Dims, kernels: &[Vec<f64>], rewards: Vec<f64>) -> LinearMixtureMdp {
    // ψ_i(s,a,s') = P^(i)(s'|s,a)/√d with θ_h = 𝟙/√d; the only parameter meeting
    // both ‖θ_h‖₂ ≤ 1 and ‖φ_V‖₂ ≤ 1 for this feature family.
    let d = kernels.len();
    let scale = 1.0 / (d as f64).sqrt();
    let mut psi = Vec::with_capacity(dims.states * dims.actions * dims.states * d);
    for s in 0..dims.states {
        for a in 0..dims.actions {
            for next in 0..dims.states {
                let i = (s * dims.actions + a) * dims.states + next;
                psi.extend(kernels.iter().map(|k| k[i] * scale));
            }
        }
    }
    let features = FeatureMap::new(dims.states, dims.actions, d, psi).expect("sizes match");
    let thetas = vec![vec![scale; d]; dims.horizon];
    LinearMixtureMdp::from_parts(dims.horizon, features, thetas, rewards, 0)
        .expect("generated parts are consistent")
}

/// Mixture of `d` Dirichlet(1) base kernels with uniform rewards.
pub fn random_linear_mixture<R: Rng + ?Sized>(
    d: usize,
    dims: Dims,
    rng: &mut R,
) -> LinearMixtureMdp {
    let kernels: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            (0..dims.states * dims.actions)
                .flat_map(|_| simplex_point(dims.states, rng))
                .collect()
        })
        .collect();
    let rewards = (0..dims.triples()).map(|_| rng.random::<f64>()).collect();
    mixture_from_kernels(dims, &kernels, rewards)
}

/// Three-state, two-action, two-kernel instance with a small action gap.
///
/// Rewards are `s / 2`. Each kernel sends mass 0.2 to the middle state; the
/// rest is split between states 2 and 0. Kernel 1 favours action 0 and kernel
/// 2 favours action 1 by `tilt`, and the equal-weight mixture leaves action 1
/// ahead by `gap` in the probability of reaching state 2.
pub fn gap_linear_mixture(horizon: usize, gap: f64) -> LinearMixtureMdp {
    const TILT: f64 = 0.3;
    assert!((0.0..=0.05).contains(&gap), "gap must lie in [0, 0.05]");
    let dims = Dims::new(3, 2, horizon).expect("positive sizes");
    let row = |top: f64| vec![0.8 - top, 0.2, top];
    let kernel = |q0: f64, q1: f64| -> Vec<f64> {
        (0..dims.states)
            .flat_map(|_| [row(q0), row(q1)])
            .flatten()
            .collect()
    };
    let kernels = vec![
        kernel(0.4 + TILT, 0.4 - TILT),
        kernel(0.4 - TILT, 0.4 + TILT + 2.0 * gap),
    ];
    let rewards = (0..dims.triples())
        .map(|i| ((i / dims.actions) % dims.states) as f64 / 2.0)
        .collect();
    mixture_from_kernels(dims, &kernels, rewards)
}
