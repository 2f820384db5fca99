//! JSON run configuration shared by every subcommand.

use std::path::Path;

use anyhow::{bail, Context};
use hetero_forecast::data::{GeneratorConfig, DEFAULT_THETA};
use hetero_forecast::eval::KEEP_GRID;
use hetero_forecast::models::{Backbone, ModelSpec, TrainConfig, Uncertainty};
use serde::{Deserialize, Serialize};

pub const RUN_CONFIG_SCHEMA_VERSION: u32 = 1;

/// Network sizes to use for every model in the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 128→64 dense, 2×128 LSTM with a 128 head.
    #[default]
    Full,
    /// 32→16 dense, 2×32 LSTM with a 32 head.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "defaults::backbones")]
    pub backbones: Vec<Backbone>,
    #[serde(default = "defaults::uncertainties")]
    pub uncertainties: Vec<Uncertainty>,
    #[serde(default)]
    pub profile: Profile,
    /// Replaces the profile's dense sizes when set.
    #[serde(default)]
    pub dense: Option<Vec<usize>>,
    /// Replaces the profile's LSTM sizes when set.
    #[serde(default)]
    pub lstm: Option<Vec<usize>>,
    #[serde(default)]
    pub dropout_p: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            backbones: defaults::backbones(),
            uncertainties: defaults::uncertainties(),
            profile: Profile::Full,
            dense: None,
            lstm: None,
            dropout_p: None,
        }
    }
}

impl GridConfig {
    /// Concrete model specs, backbone-major.
    pub fn specs(&self) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for &backbone in &self.backbones {
            for &unc in &self.uncertainties {
                let mut spec = match self.profile {
                    Profile::Full => ModelSpec::full(backbone, unc),
                    Profile::Desk => ModelSpec::desk(backbone, unc),
                };
                if let Some(d) = &self.dense {
                    spec.dense = d.clone();
                }
                if let Some(l) = &self.lstm {
                    spec.lstm = l.clone();
                }
                if let (Some(p), Uncertainty::McDropout) = (self.dropout_p, unc) {
                    spec.dropout_p = p;
                }
                out.push(spec);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "defaults::keep_grid")]
    pub keep_grid: Vec<f64>,
    /// Points per emitted error-keep curve.
    #[serde(default = "defaults::curve_points")]
    pub curve_points: usize,
    #[serde(default = "defaults::mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub mc_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            keep_grid: defaults::keep_grid(),
            curve_points: defaults::curve_points(),
            mc_samples: defaults::mc_samples(),
            mc_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: defaults::k(),
            seed: 0,
            max_iter: defaults::max_iter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Normalization threshold for the π₁ transform.
    #[serde(default = "defaults::theta")]
    pub theta: f64,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "defaults::seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: RUN_CONFIG_SCHEMA_VERSION,
            theta: defaults::theta(),
            generator: GeneratorConfig::default(),
            grid: GridConfig::default(),
            train: TrainConfig::default(),
            seeds: defaults::seeds(),
            eval: EvalConfig::default(),
            cluster: ClusterConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads and validates a config file; `None` gives the defaults.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let config = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != RUN_CONFIG_SCHEMA_VERSION {
            bail!("unsupported config schema_version {}", self.schema_version);
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            bail!("theta must be positive and finite");
        }
        if self.seeds.is_empty() {
            bail!("seeds list must not be empty");
        }
        if self.grid.backbones.is_empty() || self.grid.uncertainties.is_empty() {
            bail!("model grid must name at least one backbone and one uncertainty");
        }
        if self.eval.keep_grid.iter().any(|&k| !(k > 0.0 && k <= 1.0)) {
            bail!("keep_grid entries must lie in (0, 1]");
        }
        if self.eval.curve_points < 2 {
            bail!("curve_points must be at least 2");
        }
        if self.eval.mc_samples < 2 {
            bail!("mc_samples must be at least 2");
        }
        if self.cluster.k == 0 || self.cluster.max_iter == 0 {
            bail!("cluster k and max_iter must be positive");
        }
        self.generator.validate()?;
        self.train.validate()?;
        for spec in self.grid.specs() {
            spec.validate()?;
        }
        Ok(())
    }
}

mod defaults {
    use super::*;

    pub fn theta() -> f64 {
        DEFAULT_THETA
    }
    pub fn seeds() -> Vec<u64> {
        (0..6).collect()
    }
    pub fn backbones() -> Vec<Backbone> {
        vec![Backbone::Dense, Backbone::Lstm]
    }
    pub fn uncertainties() -> Vec<Uncertainty> {
        Uncertainty::ALL.to_vec()
    }
    pub fn keep_grid() -> Vec<f64> {
        KEEP_GRID.to_vec()
    }
    pub fn curve_points() -> usize {
        200
    }
    pub fn mc_samples() -> usize {
        50
    }
    pub fn k() -> usize {
        16
    }
    pub fn max_iter() -> usize {
        300
    }
}
