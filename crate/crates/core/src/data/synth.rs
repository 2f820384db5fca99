//! Synthetic monthly-amount series with known Laplace noise scales.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::series::RawSeries;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::rng::derive_seed;

pub const GENERATOR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// 12-month sinusoid.
    Periodic,
    /// Flat level with one spike per year at a fixed month.
    Spiky,
    /// Linear trend.
    Trend,
    /// Flat level; only the noise varies.
    Noise,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Periodic, Family::Spiky, Family::Trend, Family::Noise];
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyCounts {
    #[serde(default)]
    pub periodic: usize,
    #[serde(default)]
    pub spiky: usize,
    #[serde(default)]
    pub trend: usize,
    #[serde(default)]
    pub noise: usize,
}

impl FamilyCounts {
    pub fn get(&self, f: Family) -> usize {
        match f {
            Family::Periodic => self.periodic,
            Family::Spiky => self.spiky,
            Family::Trend => self.trend,
            Family::Noise => self.noise,
        }
    }

    pub fn total(&self) -> usize {
        Family::ALL.iter().map(|&f| self.get(f)).sum()
    }
}

/// How the per-series Laplace scale depends on the series level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseLaw {
    Constant {
        scale: f64,
    },
    /// `clamp(ratio · |level|, min, max)`.
    Proportional {
        ratio: f64,
        min: f64,
        max: f64,
    },
}

impl NoiseLaw {
    pub fn scale_for(&self, level: f64) -> f64 {
        match *self {
            NoiseLaw::Constant { scale } => scale,
            NoiseLaw::Proportional { ratio, min, max } => (ratio * level.abs()).clamp(min, max),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseLaw::Constant { scale } => scale >= 0.0 && scale.is_finite(),
            NoiseLaw::Proportional { ratio, min, max } => {
                ratio >= 0.0 && min >= 0.0 && max >= min && max.is_finite() && ratio.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid noise law {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Observed months per series.
    #[serde(default = "default_length")]
    pub length: usize,
    pub families: FamilyCounts,
    /// Uniform range of the base level.
    pub level_range: [f64; 2],
    /// Uniform range of the pattern magnitude (sinusoid amplitude, spike height, total trend change).
    pub swing_range: [f64; 2],
    pub noise: NoiseLaw,
}

fn default_length() -> usize {
    24
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            schema_version: GENERATOR_SCHEMA_VERSION,
            seed: 7,
            length: 24,
            families: FamilyCounts {
                periodic: 5000,
                spiky: 5000,
                trend: 5000,
                noise: 5000,
            },
            level_range: [10.0, 200.0],
            swing_range: [0.0, 50.0],
            noise: NoiseLaw::Proportional {
                ratio: 0.1,
                min: 1.0,
                max: 20.0,
            },
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != GENERATOR_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported generator schema_version {}",
                self.schema_version
            )));
        }
        if self.length < 2 {
            return Err(Error::Config(format!(
                "series length must be at least 2, got {}",
                self.length
            )));
        }
        if self.families.total() == 0 {
            return Err(Error::Config("family counts must sum to a positive number".into()));
        }
        for (name, [lo, hi]) in [("level_range", self.level_range), ("swing_range", self.swing_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{name} must be a finite [lo, hi] with lo <= hi")));
            }
        }
        if self.swing_range[0] < 0.0 {
            return Err(Error::Config("swing_range must be non-negative".into()));
        }
        self.noise.validate()
    }
}

/// A generated series together with its noiseless pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub series: RawSeries,
    pub family: Family,
    pub level: f64,
    /// Noiseless value of the pattern at month `T + 1`.
    pub clean_next: f64,
}

/// Draw from Laplace(0, b) by inverting its CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let p: f64 = loop {
        let p = rng.gen::<f64>();
        if p > 0.0 {
            break p;
        }
    };
    if p < 0.5 {
        b * (2.0 * p).ln()
    } else {
        -b * (2.0 * (1.0 - p)).ln()
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Noiseless values for months `1..=len+1`.
fn pattern<R: Rng + ?Sized>(family: Family, len: usize, level: f64, swing: f64, rng: &mut R) -> Vec<f64> {
    let n = len + 1;
    match family {
        Family::Periodic => {
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (0..n)
                .map(|t| level + swing * (std::f64::consts::TAU * t as f64 / 12.0 + phase).sin())
                .collect()
        }
        Family::Spiky => {
            let month = rng.gen_range(0..12usize);
            (0..n)
                .map(|t| if t % 12 == month { level + swing } else { level })
                .collect()
        }
        Family::Trend => {
            let slope = if rng.gen::<bool>() { swing } else { -swing } / len as f64;
            let mid = len as f64 / 2.0;
            (0..n).map(|t| level + slope * (t as f64 - mid)).collect()
        }
        Family::Noise => vec![level; n],
    }
}

fn generate_one(config: &GeneratorConfig, family: Family, seed: u64) -> SyntheticSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let level = uniform(&mut rng, config.level_range);
    let swing = uniform(&mut rng, config.swing_range);
    let clean = pattern(family, config.length, level, swing, &mut rng);
    let b = config.noise.scale_for(level);
    let noisy: Vec<f64> = clean.iter().map(|v| v + sample_laplace(&mut rng, b)).collect();
    SyntheticSeries {
        series: RawSeries {
            values: noisy[..config.length].to_vec(),
            target: noisy[config.length],
            true_scale: Some(b),
        },
        family,
        level,
        clean_next: clean[config.length],
    }
}

/// Generates `families.total()` series in a seeded shuffled order.
pub fn generate_synthetic(config: &GeneratorConfig, seed: u64) -> Result<Vec<SyntheticSeries>> {
    generate_synthetic_with(config, seed, ExecMode::default())
}

pub fn generate_synthetic_with(config: &GeneratorConfig, seed: u64, mode: ExecMode) -> Result<Vec<SyntheticSeries>> {
    config.validate()?;
    let jobs: Vec<Family> = Family::ALL
        .iter()
        .flat_map(|&f| std::iter::repeat(f).take(config.families.get(f)))
        .collect();
    let mut out = mode.map_range(jobs.len(), |i| {
        generate_one(config, jobs[i], derive_seed(seed, &[1, i as u64]))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2]));
    out.shuffle(&mut rng);
    Ok(out)
}
