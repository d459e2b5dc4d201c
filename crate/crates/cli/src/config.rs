//! Run configuration: built-in defaults, overlaid by an optional TOML file,
//! overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fxvg_core::analytics::Normalizer;
use fxvg_core::engine::{DriftClock, SimConfig, TimeGrid, Truncation};
use fxvg_core::model::{
    CorrelationStructure, Correlations, LocalizationConfig, ModelParams, SubordinatorParams,
};
use fxvg_core::pricing::{LsmConfig, OptionRight};
use fxvg_core::subordinator::TimeChange;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams<f64>,
    pub correlation: Correlations<f64>,
    #[serde(default)]
    pub subordinator: SubordinatorSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub contract: ContractSection,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub gof: GofSection,
    #[serde(default)]
    pub compare: CompareSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::fx_reference(),
            correlation: Correlations::fx_reference(),
            subordinator: SubordinatorSection::default(),
            simulation: SimulationSection::default(),
            contract: ContractSection::default(),
            converge: ConvergeSection::default(),
            gof: GofSection::default(),
            compare: CompareSection::default(),
        }
    }
}

/// Either the gamma shape/rate pair `(alpha, beta)` or the mean/variance
/// rate pair `(mu, nu)` of the clock per unit time. With neither, the clock
/// has unit mean and variance rate 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubordinatorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

pub const DEFAULT_VARIANCE_RATE: f64 = 0.5;

impl SubordinatorSection {
    pub fn resolve(&self) -> Result<SubordinatorParams, ConfigError> {
        let shape_rate = self.alpha.is_some() || self.beta.is_some();
        let mean_var = self.mu.is_some() || self.nu.is_some();
        let params = match (shape_rate, mean_var) {
            (true, true) => {
                return Err(ConfigError::new(
                    "subordinator: give either alpha/beta or mu/nu, not both",
                ))
            }
            (true, false) => SubordinatorParams::new(
                self.alpha.ok_or_else(|| ConfigError::new("subordinator: beta given without alpha"))?,
                self.beta.ok_or_else(|| ConfigError::new("subordinator: alpha given without beta"))?,
            ),
            (false, _) => SubordinatorParams::from_mean_variance_rate(
                self.mu.unwrap_or(1.0),
                self.nu.unwrap_or(DEFAULT_VARIANCE_RATE),
            ),
        };
        params.map_err(|e| ConfigError::new(format!("subordinator: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Bin,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub paths: usize,
    pub steps: usize,
    pub t0: f64,
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub drift_clock: DriftClock,
    pub truncation: Truncation,
    pub time_change: TimeChange,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localize: Option<u32>,
    pub workers: usize,
    /// Skip the positivity checks on the model parameters, e.g. to run
    /// zero-noise diagnostics.
    pub allow_degenerate: bool,
    pub format: OutputFormat,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            paths: 10_000,
            steps: 50,
            t0: 0.0,
            horizon: 1.0,
            seed: None,
            drift_clock: DriftClock::default(),
            truncation: Truncation::default(),
            time_change: TimeChange::default(),
            localize: None,
            workers: 0,
            allow_degenerate: false,
            format: OutputFormat::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StyleChoice {
    American,
    European,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractSection {
    pub style: StyleChoice,
    pub right: OptionRight,
    pub strikes: Vec<f64>,
    pub lsm_degree: usize,
    pub itm_only: bool,
}

impl Default for ContractSection {
    fn default() -> Self {
        Self {
            style: StyleChoice::Both,
            right: OptionRight::Put,
            strikes: vec![95.0, 100.0, 105.0],
            lsm_degree: 3,
            itm_only: true,
        }
    }
}

impl ContractSection {
    pub fn lsm(&self) -> LsmConfig {
        LsmConfig {
            degree: self.lsm_degree,
            itm_only: self.itm_only,
            ..LsmConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeSection {
    pub levels: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_level: Option<usize>,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        Self {
            levels: vec![2, 4, 8, 16],
            reference_level: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GofReference {
    /// Gaussian with the sample's mean and standard deviation.
    #[default]
    Normal,
    /// Empirical distribution of an independent model sample.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GofSection {
    /// One value per line (a header line is skipped). Without a file, the
    /// sample is either synthetic or the simulated log-returns `ln(S_T/S_0)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<PathBuf>,
    /// Number of standard normal draws to test instead of a model sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<usize>,
    pub bins: usize,
    pub reference: GofReference,
    /// Paths in the model reference sample, simulated with `seed + 1`.
    pub reference_paths: usize,
}

impl Default for GofSection {
    fn default() -> Self {
        Self {
            sample: None,
            synthetic: None,
            bins: 20,
            reference: GofReference::Normal,
            reference_paths: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<PathBuf>,
    /// `strike,price` ladder of model prices; without it the chain strikes
    /// are priced by LSM on simulated paths.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_prices: Option<PathBuf>,
    pub right: OptionRight,
    pub normalizer: Normalizer,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            chain: None,
            model_prices: None,
            right: OptionRight::Put,
            normalizer: Normalizer::Range,
        }
    }
}

/// Recursively overlays `top` onto `base`; tables merge key by key, every
/// other value replaces.
fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Defaults overlaid with the file, if any. Relative paths inside the
    /// file are resolved against the file's directory.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.gof.sample, &mut cfg.compare.chain, &mut cfg.compare.model_prices]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                let joined = base.join(&*p);
                *p = std::path::absolute(&joined).unwrap_or(joined);
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let top: toml::Value = toml::from_str(text).map_err(|e| ConfigError::new(format!("config: {e}")))?;
        let mut base = toml::Value::try_from(Self::default()).expect("defaults serialize");
        merge(&mut base, top);
        base.try_into().map_err(|e| ConfigError::new(format!("config: {e}")))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.simulation
            .seed
            .ok_or_else(|| ConfigError::new("a seed is required (--seed or [simulation] seed)"))
    }

    pub fn model(&self) -> Result<ModelParams<f64>, ConfigError> {
        if !self.simulation.allow_degenerate {
            self.model.validate().map_err(|e| ConfigError::new(format!("model: {e}")))?;
        }
        Ok(self.model)
    }

    pub fn correlation(&self) -> Result<CorrelationStructure<f64>, fxvg_core::model::ModelError> {
        CorrelationStructure::new(self.correlation)
    }

    pub fn grid(&self) -> Result<TimeGrid, ConfigError> {
        let s = &self.simulation;
        TimeGrid::new(s.t0, s.horizon, s.steps).map_err(|e| ConfigError::new(e.to_string()))
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let s = &self.simulation;
        if s.paths == 0 {
            return Err(ConfigError::new("path count must be at least 1"));
        }
        let localization = match s.localize {
            None => None,
            Some(n) if self.simulation.allow_degenerate => Some(LocalizationConfig::unchecked(n)),
            Some(n) => Some(
                LocalizationConfig::new(n, &self.model.initial_state())
                    .map_err(|e| ConfigError::new(format!("localization: {e}")))?,
            ),
        };
        Ok(SimConfig {
            n_paths: s.paths,
            seed: self.seed()?,
            drift_clock: s.drift_clock,
            truncation: s.truncation,
            time_change: s.time_change,
            localization,
            workers: s.workers,
        })
    }
}
