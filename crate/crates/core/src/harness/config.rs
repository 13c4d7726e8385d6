use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mdp::envfile::{self, Environment};
use crate::mdp::{generate, Dims};
use crate::oracle::{NoiseMode, NoiseModel};
use crate::params::{Constants, RunSettings};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Qucrl,
    QucrlVtr,
    ClassicalUcrl,
    ClassicalVtr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Qucrl,
        Algorithm::QucrlVtr,
        Algorithm::ClassicalUcrl,
        Algorithm::ClassicalVtr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Qucrl => "qucrl",
            Algorithm::QucrlVtr => "qucrl-vtr",
            Algorithm::ClassicalUcrl => "classical-ucrl",
            Algorithm::ClassicalVtr => "classical-vtr",
        }
    }

    /// UCRL-VTR variants need a linear mixture; the tabular ones accept either
    /// kind and materialize linear mixtures into tables.
    pub fn needs_linear_mixture(self) -> bool {
        matches!(self, Algorithm::QucrlVtr | Algorithm::ClassicalVtr)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Seeded instance generators available from configs and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Dirichlet rows and uniform rewards.
    Tabular {
        states: usize,
        actions: usize,
        horizon: usize,
        seed: u64,
    },
    /// Mixture of `dim` Dirichlet base kernels.
    Linmix {
        dim: usize,
        states: usize,
        actions: usize,
        horizon: usize,
        seed: u64,
    },
    /// Two states, the last action is better by `gap`.
    GapTabular {
        actions: usize,
        horizon: usize,
        gap: f64,
    },
    /// Three states, two actions, two kernels; action 1 is better by `gap`.
    GapLinmix {
        horizon: usize,
        gap: f64,
    },
    Chain {
        states: usize,
        horizon: usize,
    },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<Environment> {
        match *self {
            GeneratorSpec::Tabular {
                states,
                actions,
                horizon,
                seed,
            } => {
                let dims = Dims::new(states, actions, horizon)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(Environment::Tabular(generate::random_tabular(
                    dims, &mut rng,
                )))
            }
            GeneratorSpec::Linmix {
                dim,
                states,
                actions,
                horizon,
                seed,
            } => {
                if dim == 0 {
                    return Err(Error::Config("feature dimension must be positive".into()));
                }
                let dims = Dims::new(states, actions, horizon)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(Environment::LinearMixture(generate::random_linear_mixture(
                    dim, dims, &mut rng,
                )))
            }
            GeneratorSpec::GapTabular {
                actions,
                horizon,
                gap,
            } => {
                Dims::new(2, actions, horizon)?;
                if !(0.0..=0.5).contains(&gap) {
                    return Err(Error::Config(format!(
                        "gap must lie in [0, 0.5], got {gap}"
                    )));
                }
                Ok(Environment::Tabular(generate::gap_tabular(
                    actions, horizon, gap,
                )))
            }
            GeneratorSpec::GapLinmix { horizon, gap } => {
                Dims::new(3, 2, horizon)?;
                if !(0.0..=0.05).contains(&gap) {
                    return Err(Error::Config(format!(
                        "gap must lie in [0, 0.05], got {gap}"
                    )));
                }
                Ok(Environment::LinearMixture(generate::gap_linear_mixture(
                    horizon, gap,
                )))
            }
            GeneratorSpec::Chain { states, horizon } => {
                Dims::new(states, 1, horizon)?;
                Ok(Environment::Tabular(generate::chain(states, horizon)))
            }
        }
    }
}

/// Where a run's environment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSource {
    File(PathBuf),
    Generate(GeneratorSpec),
}

impl EnvSource {
    pub fn load(&self) -> Result<Environment> {
        match self {
            EnvSource::File(path) if !path.is_file() => Err(Error::Config(format!(
                "environment file {} does not exist",
                path.display()
            ))),
            EnvSource::File(path) => envfile::load(path),
            EnvSource::Generate(spec) => spec.build(),
        }
    }
}

fn default_delta() -> f64 {
    0.1
}

fn default_noise() -> NoiseMode {
    NoiseMode::Zero
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvSource,
    pub algorithm: Algorithm,
    /// Episode budget `T`.
    pub episodes: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default = "default_noise")]
    pub noise: NoiseMode,
    #[serde(default)]
    pub failure_injection: bool,
    #[serde(default)]
    pub seed: u64,
    /// Where `run` persists its record; `None` keeps it in memory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(environment: EnvSource, algorithm: Algorithm, episodes: u64) -> Self {
        Self {
            environment,
            algorithm,
            episodes,
            delta: default_delta(),
            constants: Constants::default(),
            noise: default_noise(),
            failure_injection: false,
            seed: 0,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings::new(self.episodes, self.delta)
            .with_constants(self.constants)
            .with_noise(NoiseModel::new(self.noise, self.failure_injection))
    }

    /// Check the config against a loaded environment.
    pub fn validate(&self, env: &Environment) -> Result<()> {
        self.settings().validate()?;
        if self.algorithm.needs_linear_mixture() && !matches!(env, Environment::LinearMixture(_)) {
            return Err(Error::Config(format!(
                "{} needs a linear mixture environment, got {}",
                self.algorithm,
                env.kind()
            )));
        }
        if !self.algorithm.needs_linear_mixture() && self.episodes < env.horizon() as u64 {
            return Err(Error::Config(format!(
                "episode budget {} is shorter than the horizon {}",
                self.episodes,
                env.horizon()
            )));
        }
        Ok(())
    }

    /// SHA-256 over every field that can change a run's output except the
    /// seed: algorithm, budget, confidence, constants, noise and the
    /// environment's canonical serialization.
    pub fn hash(&self, env: &Environment) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            algorithm: Algorithm,
            episodes: u64,
            delta: f64,
            constants: &'a Constants,
            noise: NoiseMode,
            failure_injection: bool,
            environment: String,
        }
        let canonical = serde_json::to_string(&Hashed {
            algorithm: self.algorithm,
            episodes: self.episodes,
            delta: self.delta,
            constants: &self.constants,
            noise: self.noise,
            failure_injection: self.failure_injection,
            environment: envfile::to_json(env),
        })
        .expect("hash input serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig::new(
            EnvSource::Generate(GeneratorSpec::Tabular {
                states: 2,
                actions: 2,
                horizon: 2,
                seed: 5,
            }),
            Algorithm::Qucrl,
            100,
        )
    }

    #[test]
    fn json_round_trip() {
        let c = config();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(
            r#"{"environment": {"generate": {"generator": "chain", "states": 3, "horizon": 2}},
                "algorithm": "classical-ucrl", "episodes": 10}"#,
        )
        .unwrap();
        assert_eq!(c.delta, 0.1);
        assert_eq!(c.noise, NoiseMode::Zero);
        assert_eq!(c.constants, Constants::default());
    }

    #[test]
    fn hash_tracks_every_constant_but_not_seed() {
        let c = config();
        let env = c.environment.load().unwrap();
        let base = c.hash(&env);
        let mut other = c.clone();
        other.seed = 99;
        other.output_dir = Some("elsewhere".into());
        assert_eq!(other.hash(&env), base);
        for change in 0..6 {
            let mut k = c.constants;
            match change {
                0 => k.c1 *= 2.0,
                1 => k.c_amp *= 2.0,
                2 => k.c_mean *= 2.0,
                3 => k.c_k *= 2.0,
                4 => k.lambda *= 2.0,
                _ => k.epsilon_floor *= 2.0,
            }
            let changed = ExperimentConfig {
                constants: k,
                ..c.clone()
            };
            assert_ne!(changed.hash(&env), base, "constant {change}");
        }
        let mut noisy = c.clone();
        noisy.noise = NoiseMode::Boundary;
        assert_ne!(noisy.hash(&env), base);
    }

    #[test]
    fn vtr_needs_linear_mixture() {
        let mut c = config();
        c.algorithm = Algorithm::QucrlVtr;
        let env = c.environment.load().unwrap();
        assert!(c.validate(&env).unwrap_err().is_config());
    }

    #[test]
    fn unknown_algorithm() {
        assert!("ucrl3".parse::<Algorithm>().is_err());
        assert_eq!(
            "qucrl-vtr".parse::<Algorithm>().unwrap(),
            Algorithm::QucrlVtr
        );
    }
}
