//! JSON environment files.
//!
//! ```json
//! { "kind": "tabular", "S": 2, "A": 1, "H": 1, "s1": 0,
//!   "R": [[[0.5], [1.0]]],
//!   "P": [[[[0.5, 0.5]], [[0.0, 1.0]]]] }
//! ```
//!
//! `P` is indexed `[h][s][a][s']` and `R` `[h][s][a]`. Linear mixture files use
//! `"kind": "linmix"` with `d`, `psi` indexed `[s][a][s'][i]` and `theta`
//! indexed `[h][i]` in place of `P`.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dims, FeatureMap, LinearMixtureMdp, TabularMdp};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum EnvSpec {
    Tabular {
        #[serde(rename = "S")]
        states: usize,
        #[serde(rename = "A")]
        actions: usize,
        #[serde(rename = "H")]
        horizon: usize,
        s1: usize,
        #[serde(rename = "R")]
        rewards: Vec<Vec<Vec<f64>>>,
        #[serde(rename = "P")]
        transitions: Vec<Vec<Vec<Vec<f64>>>>,
    },
    Linmix {
        #[serde(rename = "S")]
        states: usize,
        #[serde(rename = "A")]
        actions: usize,
        #[serde(rename = "H")]
        horizon: usize,
        d: usize,
        s1: usize,
        #[serde(rename = "R")]
        rewards: Vec<Vec<Vec<f64>>>,
        psi: Vec<Vec<Vec<Vec<f64>>>>,
        theta: Vec<Vec<f64>>,
    },
}

/// A loaded environment of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Tabular(TabularMdp),
    LinearMixture(LinearMixtureMdp),
}

impl Environment {
    pub fn horizon(&self) -> usize {
        match self {
            Environment::Tabular(m) => m.horizon(),
            Environment::LinearMixture(m) => m.horizon(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Environment::Tabular(_) => "tabular",
            Environment::LinearMixture(_) => "linmix",
        }
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<Environment> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}

pub fn save(env: &Environment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(env)).map_err(|e| Error::io(path, e))
}

/// Parse and validate; `origin` names the source in error messages.
pub fn parse(text: &str, origin: &str) -> Result<Environment> {
    let spec: EnvSpec = serde_json::from_str(text).map_err(|e| Error::EnvFile {
        path: origin.to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let at = |key: &str, message: String| Error::EnvFile {
        path: origin.to_string(),
        line: key_line(text, key),
        message,
    };
    match spec {
        EnvSpec::Tabular {
            states,
            actions,
            horizon,
            s1,
            rewards,
            transitions,
        } => {
            let dims = Dims::new(states, actions, horizon).map_err(|e| at("S", e.to_string()))?;
            check_shape(&rewards, &[horizon, states, actions], "R").map_err(|m| at("R", m))?;
            check_shape4(&transitions, &[horizon, states, actions, states], "P")
                .map_err(|m| at("P", m))?;
            let p = transitions
                .into_iter()
                .flatten()
                .flatten()
                .flatten()
                .collect();
            let r = rewards.into_iter().flatten().flatten().collect();
            TabularMdp::new(dims, p, r, s1)
                .map(Environment::Tabular)
                .map_err(|e| at(field_of(&e), e.to_string()))
        }
        EnvSpec::Linmix {
            states,
            actions,
            horizon,
            d,
            s1,
            rewards,
            psi,
            theta,
        } => {
            Dims::new(states, actions, horizon).map_err(|e| at("S", e.to_string()))?;
            check_shape(&rewards, &[horizon, states, actions], "R").map_err(|m| at("R", m))?;
            check_shape4(&psi, &[states, actions, states, d], "psi").map_err(|m| at("psi", m))?;
            if theta.len() != horizon || theta.iter().any(|t| t.len() != d) {
                return Err(at(
                    "theta",
                    format!("theta must have shape [{horizon}][{d}]"),
                ));
            }
            let features = FeatureMap::new(
                states,
                actions,
                d,
                psi.into_iter().flatten().flatten().flatten().collect(),
            )
            .map_err(|e| at("psi", e.to_string()))?;
            let r = rewards.into_iter().flatten().flatten().collect();
            let mdp = LinearMixtureMdp::from_parts(horizon, features, theta, r, s1)
                .map_err(|e| at("theta", e.to_string()))?;
            // the feature-bound check is exact for small S, so the seed only
            // matters for very large state spaces
            mdp.validate(&mut ChaCha8Rng::seed_from_u64(0))
                .map_err(|e| at("theta", e.to_string()))?;
            Ok(Environment::LinearMixture(mdp))
        }
    }
}

fn field_of(e: &Error) -> &'static str {
    let msg = e.to_string();
    if msg.contains("R[") || msg.contains("reward") {
        "R"
    } else if msg.contains("initial state") {
        "s1"
    } else {
        "P"
    }
}

/// 1-based line of the first occurrence of `"key"`; 1 if absent.
fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map_or(1, |i| i + 1)
}

fn check_shape(
    x: &[Vec<Vec<f64>>],
    shape: &[usize; 3],
    name: &str,
) -> std::result::Result<(), String> {
    let ok = x.len() == shape[0]
        && x.iter()
            .all(|a| a.len() == shape[1] && a.iter().all(|b| b.len() == shape[2]));
    if ok {
        Ok(())
    } else {
        Err(format!("{name} must have shape {shape:?}"))
    }
}

fn check_shape4(
    x: &[Vec<Vec<Vec<f64>>>],
    shape: &[usize; 4],
    name: &str,
) -> std::result::Result<(), String> {
    let ok = x.len() == shape[0]
        && x.iter().all(|a| {
            a.len() == shape[1]
                && a.iter()
                    .all(|b| b.len() == shape[2] && b.iter().all(|c| c.len() == shape[3]))
        });
    if ok {
        Ok(())
    } else {
        Err(format!("{name} must have shape {shape:?}"))
    }
}

fn row(x: &[f64]) -> String {
    serde_json::to_string(x).expect("finite floats serialize")
}

/// Serialize with one innermost block per line.
pub fn to_json(env: &Environment) -> String {
    let mut out = String::from("{\n");
    let rewards = |out: &mut String, dims: Dims, r: &dyn Fn(usize, usize, usize) -> f64| {
        out.push_str("  \"R\": [\n");
        for h in 0..dims.horizon {
            let blocks: Vec<String> = (0..dims.states)
                .map(|s| row(&(0..dims.actions).map(|a| r(h, s, a)).collect::<Vec<_>>()))
                .collect();
            let sep = if h + 1 < dims.horizon { "," } else { "" };
            let _ = writeln!(out, "    [{}]{sep}", blocks.join(", "));
        }
        out.push_str("  ],\n");
    };
    match env {
        Environment::Tabular(m) => {
            let dims = m.dims();
            let _ = writeln!(
                out,
                "  \"kind\": \"tabular\",\n  \"S\": {},\n  \"A\": {},\n  \"H\": {},\n  \"s1\": {},",
                dims.states,
                dims.actions,
                dims.horizon,
                m.initial_state()
            );
            rewards(&mut out, dims, &|h, s, a| m.reward(h, s, a));
            out.push_str("  \"P\": [\n");
            for h in 0..dims.horizon {
                out.push_str("    [\n");
                for s in 0..dims.states {
                    let blocks: Vec<String> = (0..dims.actions)
                        .map(|a| row(m.transition(h, s, a)))
                        .collect();
                    let sep = if s + 1 < dims.states { "," } else { "" };
                    let _ = writeln!(out, "      [{}]{sep}", blocks.join(", "));
                }
                let sep = if h + 1 < dims.horizon { "," } else { "" };
                let _ = writeln!(out, "    ]{sep}");
            }
            out.push_str("  ]\n}\n");
        }
        Environment::LinearMixture(m) => {
            let dims = m.dims();
            let fm = m.features();
            let _ = writeln!(
                out,
                "  \"kind\": \"linmix\",\n  \"S\": {},\n  \"A\": {},\n  \"H\": {},\n  \"d\": {},\n  \"s1\": {},",
                dims.states,
                dims.actions,
                dims.horizon,
                m.dim(),
                m.initial_state()
            );
            rewards(&mut out, dims, &|h, s, a| m.reward(h, s, a));
            out.push_str("  \"theta\": [\n");
            for h in 0..dims.horizon {
                let sep = if h + 1 < dims.horizon { "," } else { "" };
                let _ = writeln!(out, "    {}{sep}", row(m.theta(h)));
            }
            out.push_str("  ],\n  \"psi\": [\n");
            for s in 0..dims.states {
                out.push_str("    [\n");
                for a in 0..dims.actions {
                    let blocks: Vec<String> =
                        (0..dims.states).map(|n| row(fm.psi(s, a, n))).collect();
                    let sep = if a + 1 < dims.actions { "," } else { "" };
                    let _ = writeln!(out, "      [{}]{sep}", blocks.join(", "));
                }
                let sep = if s + 1 < dims.states { "," } else { "" };
                let _ = writeln!(out, "    ]{sep}");
            }
            out.push_str("  ]\n}\n");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::generate;

    #[test]
    fn tabular_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let env = Environment::Tabular(generate::random_tabular(
            Dims::new(3, 2, 2).unwrap(),
            &mut rng,
        ));
        let text = to_json(&env);
        assert_eq!(parse(&text, "mem").unwrap(), env);
    }

    #[test]
    fn linmix_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let env = Environment::LinearMixture(generate::random_linear_mixture(
            2,
            Dims::new(3, 2, 2).unwrap(),
            &mut rng,
        ));
        assert_eq!(parse(&to_json(&env), "mem").unwrap(), env);
    }

    #[test]
    fn syntax_error_has_line() {
        let text = "{\n  \"kind\": \"tabular\",\n  \"S\": 2,\n  oops\n}";
        match parse(text, "bad.json") {
            Err(Error::EnvFile { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_row_points_at_field() {
        let text = r#"{
  "kind": "tabular",
  "S": 2,
  "A": 1,
  "H": 1,
  "s1": 0,
  "R": [[[0.5], [1.0]]],
  "P": [[[[0.5, 0.6]], [[0.0, 1.0]]]]
}"#;
        match parse(text, "bad.json") {
            Err(Error::EnvFile { line, message, .. }) => {
                assert_eq!(line, 8);
                assert!(message.contains("sums to"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_error_points_at_field() {
        let text = r#"{
  "kind": "tabular",
  "S": 2,
  "A": 1,
  "H": 1,
  "s1": 0,
  "R": [[[0.5]]],
  "P": [[[[0.5, 0.5]], [[0.0, 1.0]]]]
}"#;
        assert!(matches!(
            parse(text, "x"),
            Err(Error::EnvFile { line: 7, .. })
        ));
    }

    #[test]
    fn linmix_feature_bound_enforced() {
        // two unnormalized kernels: φ_1 = (1, 1) has norm √2
        let text = r#"{
  "kind": "linmix",
  "S": 1,
  "A": 1,
  "H": 1,
  "d": 2,
  "s1": 0,
  "R": [[[0.0]]],
  "theta": [[1.0, 0.0]],
  "psi": [[[[1.0, 1.0]]]]
}"#;
        match parse(text, "x") {
            Err(Error::EnvFile { line, message, .. }) => {
                assert_eq!(line, 9);
                assert!(message.contains("exceeds 1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
