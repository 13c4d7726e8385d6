use serde::{Deserialize, Serialize};

use crate::oracle::NoiseModel;
use crate::{Error, Result};

/// Constants the analysis hides inside `O(·)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    /// Bonus scale (tabular and classical bonuses, classical ellipsoid radius).
    pub c1: f64,
    /// Amplitude-estimation radius scale.
    pub c_amp: f64,
    /// Mean-estimation cost scale.
    pub c_mean: f64,
    /// Phase-count constant used to split the failure probability in UCRL-VTR.
    pub c_k: f64,
    /// Ridge regularizer.
    pub lambda: f64,
    /// Smallest accuracy the feature search will ask for.
    pub epsilon_floor: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c_amp: 1.0,
            c_mean: 1.0,
            c_k: 4.0,
            lambda: 1.0,
            epsilon_floor: (2.0f64).powi(-20),
        }
    }
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c1", self.c1),
            ("c_amp", self.c_amp),
            ("c_mean", self.c_mean),
            ("c_k", self.c_k),
            ("lambda", self.lambda),
            ("epsilon_floor", self.epsilon_floor),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "constant {name} must be positive, got {v}"
                )));
            }
        }
        if self.epsilon_floor >= 1.0 {
            return Err(Error::Config("epsilon_floor must be below 1".into()));
        }
        Ok(())
    }

    /// `⌈log₂(1/ε_floor)⌉`, the last accuracy level of the feature search.
    pub fn max_search_level(&self) -> u32 {
        (1.0 / self.epsilon_floor).log2().ceil().max(1.0) as u32
    }
}

/// Budget, confidence and oracle behaviour shared by every algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    /// Episode budget `T`.
    pub episodes: u64,
    pub delta: f64,
    pub constants: Constants,
    pub noise: NoiseModel,
}

impl RunSettings {
    pub fn new(episodes: u64, delta: f64) -> Self {
        Self {
            episodes,
            delta,
            constants: Constants::default(),
            noise: NoiseModel::EXACT,
        }
    }

    pub fn with_constants(mut self, constants: Constants) -> Self {
        self.constants = constants;
        self
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episode budget must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        self.constants.validate()
    }

    /// `ln T`, floored at 1 so log terms stay meaningful for tiny budgets.
    pub(crate) fn ln_t(&self) -> f64 {
        (self.episodes as f64).ln().max(1.0)
    }

    /// `log₂ T`, floored at 1.
    pub(crate) fn log2_t(&self) -> f64 {
        (self.episodes as f64).log2().max(1.0)
    }
}
