use super::{Dims, Policy, TabularMdp, ValueTable};
use crate::Result;

/// Exact `V^π`, `Q^π` by backward induction.
pub fn policy_evaluation(mdp: &TabularMdp, pi: &Policy) -> Result<ValueTable> {
    let dims = mdp.dims();
    pi.check_dims(dims)?;
    let mut table = ValueTable::zeros(dims);
    for h in (0..dims.horizon).rev() {
        for s in 0..dims.states {
            let mut v = 0.0;
            for a in 0..dims.actions {
                let q = mdp.reward(h, s, a) + mdp.expected_next(h, s, a, table.v_row(h + 1));
                table.set_q(h, s, a, q);
                v += pi.probs(h, s)[a] * q;
            }
            table.set_v(h, s, v);
        }
    }
    Ok(table)
}

/// `V*`, `Q*` and the greedy deterministic optimal policy.
pub fn optimal_values(mdp: &TabularMdp) -> (ValueTable, Policy) {
    let dims = mdp.dims();
    let mut table = ValueTable::zeros(dims);
    for h in (0..dims.horizon).rev() {
        for s in 0..dims.states {
            for a in 0..dims.actions {
                let q = mdp.reward(h, s, a) + mdp.expected_next(h, s, a, table.v_row(h + 1));
                table.set_q(h, s, a, q);
            }
        }
        table.set_v_greedy(h);
    }
    let pi = Policy::greedy(&table);
    (table, pi)
}

/// Distribution of `s_h` under `π` for `h in 0..=H`; `h == H` is the law of
/// the state reached after the last transition.
pub fn state_occupancy(mdp: &TabularMdp, pi: &Policy, h: usize) -> Result<Vec<f64>> {
    let dims = mdp.dims();
    pi.check_dims(dims)?;
    if h > dims.horizon {
        return Err(crate::Error::StepOutOfRange {
            step: h,
            horizon: dims.horizon,
        });
    }
    let mut d = vec![0.0; dims.states];
    d[mdp.initial_state()] = 1.0;
    for step in 0..h {
        d = push_forward(mdp, pi, step, &d);
    }
    Ok(d)
}

fn push_forward(mdp: &TabularMdp, pi: &Policy, h: usize, d: &[f64]) -> Vec<f64> {
    let dims = mdp.dims();
    let mut next = vec![0.0; dims.states];
    for (s, &ds) in d.iter().enumerate() {
        if ds == 0.0 {
            continue;
        }
        for (a, &pa) in pi.probs(h, s).iter().enumerate() {
            let w = ds * pa;
            if w == 0.0 {
                continue;
            }
            for (n, p) in next.iter_mut().zip(mdp.transition(h, s, a)) {
                *n += w * p;
            }
        }
    }
    next
}

/// Joint law of `(s_h, a_h)` under `π`, flattened `[s][a]`.
pub fn occupancy_measure(mdp: &TabularMdp, pi: &Policy, h: usize) -> Result<Vec<f64>> {
    let dims = mdp.dims();
    dims.check_step(h)?;
    let d = state_occupancy(mdp, pi, h)?;
    Ok(joint(dims, pi, h, &d))
}

fn joint(dims: Dims, pi: &Policy, h: usize, d: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(dims.states * dims.actions);
    for (s, &ds) in d.iter().enumerate() {
        out.extend(pi.probs(h, s).iter().map(|p| ds * p));
    }
    out
}

/// Law of `s_{h+1}` when `(s_h, a_h)` follows `π`.
pub fn next_state_distribution(mdp: &TabularMdp, pi: &Policy, h: usize) -> Result<Vec<f64>> {
    mdp.dims().check_step(h)?;
    state_occupancy(mdp, pi, h + 1)
}

/// Absolute gap between the two sides of the value-decomposition identity
///
/// `V̂_1(s_1) - V^π_1(s_1) = Σ_h E_π[<Q̂_h(s_h,·), π̂_h(·|s_h) - π_h(·|s_h)>]
///                         + Σ_h E_π[Q̂_h(s_h,a_h) - R_h(s_h,a_h) - (P_h V̂_{h+1})(s_h,a_h)]`
///
/// where `V̂_h(s) = <Q̂_h(s,·), π̂_h(·|s)>` is built from `q_hat` (its `V` rows are ignored).
pub fn value_decomposition_residual(
    mdp: &TabularMdp,
    pi: &Policy,
    pi_hat: &Policy,
    q_hat: &ValueTable,
) -> Result<f64> {
    let dims = mdp.dims();
    pi.check_dims(dims)?;
    pi_hat.check_dims(dims)?;
    if q_hat.dims() != dims {
        return Err(crate::Error::Dimension(format!(
            "Q-table dims {:?} do not match MDP dims {:?}",
            q_hat.dims(),
            dims
        )));
    }

    let mut v_hat = vec![0.0; (dims.horizon + 1) * dims.states];
    for h in 0..dims.horizon {
        for s in 0..dims.states {
            v_hat[dims.hs(h, s)] = dot(q_hat.q_row(h, s), pi_hat.probs(h, s));
        }
    }
    let v_pi = policy_evaluation(mdp, pi)?;
    let s1 = mdp.initial_state();
    let lhs = v_hat[s1] - v_pi.v(0, s1);

    let mut rhs = 0.0;
    let mut d = vec![0.0; dims.states];
    d[s1] = 1.0;
    for h in 0..dims.horizon {
        let next_v = &v_hat[(h + 1) * dims.states..(h + 2) * dims.states];
        for (s, &ds) in d.iter().enumerate() {
            if ds == 0.0 {
                continue;
            }
            let q_row = q_hat.q_row(h, s);
            let policy_gap: f64 = q_row
                .iter()
                .zip(pi_hat.probs(h, s).iter().zip(pi.probs(h, s)))
                .map(|(q, (ph, p))| q * (ph - p))
                .sum();
            rhs += ds * policy_gap;
            for (a, &pa) in pi.probs(h, s).iter().enumerate() {
                let bellman = q_row[a] - mdp.reward(h, s, a) - mdp.expected_next(h, s, a, next_v);
                rhs += ds * pa * bellman;
            }
        }
        d = push_forward(mdp, pi, h, &d);
    }
    Ok((lhs - rhs).abs())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
