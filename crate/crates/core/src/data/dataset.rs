use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureVector};
use super::series::RawSeries;
use crate::error::{Error, Result};
use crate::exec::ExecMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    /// `features.flatten()`, cached.
    pub input: Vec<f64>,
    pub target: f64,
    pub raw: RawSeries,
}

impl Example {
    pub fn from_series(raw: RawSeries, theta: f64) -> Self {
        let features = featurize(&raw.values, theta);
        Self {
            input: features.flatten(),
            target: raw.target,
            features,
            raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub split: SplitTag,
}

impl Dataset {
    pub fn from_series(series: Vec<RawSeries>, theta: f64, split: SplitTag) -> Result<Self> {
        Self::from_series_with(series, theta, split, ExecMode::default())
    }

    pub fn from_series_with(series: Vec<RawSeries>, theta: f64, split: SplitTag, mode: ExecMode) -> Result<Self> {
        if let Some(first) = series.first() {
            let t = first.len();
            for s in &series {
                s.validate()?;
                if s.len() != t {
                    return Err(Error::Shape(format!("mixed series lengths {t} and {}", s.len())));
                }
            }
        }
        let examples = mode.map_slice(&series, |s| Example::from_series(s.clone(), theta));
        Ok(Self { examples, split })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// `T + 2`, or 0 for an empty dataset.
    pub fn input_dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.input.len())
    }

    pub fn series_len(&self) -> usize {
        self.examples.first().map_or(0, |e| e.raw.len())
    }

    pub fn targets(&self) -> Vec<f64> {
        self.examples.iter().map(|e| e.target).collect()
    }
}

/// Seeded shuffle into `(train, validation)` with `round(fraction · N)` validation examples.
pub fn split(dataset: &Dataset, validation_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if dataset.is_empty() {
        return Err(Error::Domain("cannot split an empty dataset".into()));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "validation fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    let n = dataset.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (validation_fraction * n as f64).round() as usize;
    let pick = |ids: &[usize], tag| Dataset {
        examples: ids.iter().map(|&i| dataset.examples[i].clone()).collect(),
        split: tag,
    };
    Ok((
        pick(&idx[n_val..], SplitTag::Train),
        pick(&idx[..n_val], SplitTag::Validation),
    ))
}
