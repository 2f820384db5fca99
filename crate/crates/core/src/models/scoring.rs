//! Turning model outputs into `(ŷ, υ, y)` records for selective evaluation.

use serde::{Deserialize, Serialize};

use super::baselines::{baseline_predict, input_variance_score, BaselineKind};
use super::network::Model;
use super::spec::Uncertainty;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::rng::derive_seed;

/// One forecast with its uncertainty score (lower = more confident).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub y_hat: f64,
    pub score: f64,
    pub y_true: f64,
}

impl PredictionRecord {
    pub fn abs_error(&self) -> f64 {
        (self.y_true - self.y_hat).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Population variance of the input window.
    Var,
    /// Learned heteroscedastic scale.
    BHet,
    /// Standard deviation of MC-dropout samples.
    Drop,
}

impl ScoreKind {
    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Var => "var",
            ScoreKind::BHet => "b_het",
            ScoreKind::Drop => "drop",
        }
    }

    /// Scores a model of the given kind can be paired with.
    pub fn available_for(u: Uncertainty) -> &'static [ScoreKind] {
        match u {
            Uncertainty::Point | Uncertainty::Homoscedastic => &[ScoreKind::Var],
            Uncertainty::Heteroscedastic => &[ScoreKind::Var, ScoreKind::BHet],
            Uncertainty::McDropout => &[ScoreKind::Var, ScoreKind::Drop],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_samples: 50, seed: 0 }
    }
}

/// Per-example model output before a score is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOutput {
    pub y_hat: f64,
    /// `b` of homoscedastic and heteroscedastic models.
    pub scale: Option<f64>,
    /// MC-dropout standard deviation.
    pub dropout_std: Option<f64>,
}

/// Runs the model over a dataset. MC-dropout models report the sample mean as `ŷ`.
pub fn model_outputs(model: &Model, data: &Dataset, mc: McConfig, mode: ExecMode) -> Result<Vec<ModelOutput>> {
    let mc_model = model.spec().uncertainty == Uncertainty::McDropout;
    mode.try_map_range(data.len(), |i| {
        let x = &data.examples[i].input;
        if mc_model {
            let (y_hat, sd) = model.mc_dropout_predict(x, mc.n_samples, derive_seed(mc.seed, &[i as u64]))?;
            Ok(ModelOutput {
                y_hat,
                scale: None,
                dropout_std: Some(sd),
            })
        } else {
            let p = model.predict(x)?;
            Ok(ModelOutput {
                y_hat: p.y_hat,
                scale: p.scale,
                dropout_std: None,
            })
        }
    })
}

pub fn records_with_score(outputs: &[ModelOutput], data: &Dataset, score: ScoreKind) -> Result<Vec<PredictionRecord>> {
    if outputs.len() != data.len() {
        return Err(Error::Shape("outputs and dataset differ in length".into()));
    }
    outputs
        .iter()
        .zip(&data.examples)
        .map(|(o, ex)| {
            let s = match score {
                ScoreKind::Var => Some(input_variance_score(&ex.raw)),
                ScoreKind::BHet => o.scale,
                ScoreKind::Drop => o.dropout_std,
            }
            .ok_or_else(|| Error::Usage(format!("score `{}` is not available for this model", score.name())))?;
            Ok(PredictionRecord {
                y_hat: o.y_hat,
                score: s,
                y_true: ex.target,
            })
        })
        .collect()
}

pub fn baseline_records(kind: BaselineKind, data: &Dataset) -> Vec<PredictionRecord> {
    data.examples
        .iter()
        .map(|ex| PredictionRecord {
            y_hat: baseline_predict(kind, &ex.raw),
            score: input_variance_score(&ex.raw),
            y_true: ex.target,
        })
        .collect()
}
