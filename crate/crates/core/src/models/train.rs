//! Mini-batch Adam training with early stopping on a held-out validation split.
//!
//! Per-sample gradients are accumulated in fixed-size chunks, chunks may run in
//! parallel, and chunk sums are reduced in order. The result therefore does not
//! depend on the execution mode or the number of worker threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Dropout, Model, Scaler};
use crate::data::{split, Dataset, Example};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::nn::{adam_step, AdamConfig, AdamState, Gradients, Tape};
use crate::rng::derive_seed;

const CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "defaults::max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "defaults::patience")]
    pub patience: usize,
    #[serde(default = "defaults::validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: AdamConfig,
    /// Fit the input/target scaler on the training split before the first epoch.
    #[serde(default = "defaults::standardize")]
    pub standardize: bool,
    #[serde(skip)]
    pub exec: ExecMode,
}

mod defaults {
    pub fn max_epochs() -> usize {
        800
    }
    pub fn patience() -> usize {
        20
    }
    pub fn validation_fraction() -> f64 {
        0.1
    }
    pub fn batch_size() -> usize {
        256
    }
    pub fn standardize() -> bool {
        true
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: defaults::max_epochs(),
            patience: defaults::patience(),
            validation_fraction: defaults::validation_fraction(),
            batch_size: defaults::batch_size(),
            seed: 0,
            optimizer: AdamConfig::default(),
            standardize: true,
            exec: ExecMode::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation_fraction must lie in (0, 1)".into()));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.eps >= 0.0) {
            return Err(Error::Config(format!("invalid optimizer settings {o:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch's batches.
    pub train_loss: f64,
    /// Mean per-sample validation loss (dropout disabled).
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub model: String,
    pub seed: u64,
    pub epochs: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: History,
}

fn sample_loss(
    model: &Model,
    ex: &Example,
    seed: Option<u64>,
    weight: f64,
    grads: Option<&mut Gradients>,
) -> Result<f64> {
    let mut tape = Tape::new(&model.params);
    let mut rng;
    let mut dropout = match seed {
        Some(s) if model.spec().dropout_p > 0.0 => {
            rng = ChaCha8Rng::seed_from_u64(s);
            Some(Dropout {
                p: model.spec().dropout_p,
                rng: &mut rng,
            })
        }
        _ => None,
    };
    let loss = model.loss(&mut tape, &ex.input, ex.target, dropout.as_mut())?;
    if let Some(g) = grads {
        tape.backward_into(loss, weight, g)?;
    }
    tape.scalar(loss)
}

/// Mean loss and mean gradient over one batch.
fn batch_gradient(model: &Model, examples: &[&Example], dropout_seed: u64, mode: ExecMode) -> Result<(f64, Gradients)> {
    let weight = 1.0 / examples.len() as f64;
    let n_chunks = examples.len().div_ceil(CHUNK);
    let partials = mode.try_map_range(n_chunks, |c| {
        let mut g = Gradients::zeros_like(&model.params);
        let mut total = 0.0;
        for (k, ex) in examples[c * CHUNK..((c + 1) * CHUNK).min(examples.len())]
            .iter()
            .enumerate()
        {
            let s = derive_seed(dropout_seed, &[(c * CHUNK + k) as u64]);
            total += sample_loss(model, ex, Some(s), weight, Some(&mut g))?;
        }
        Ok::<_, Error>((total, g))
    })?;
    let mut it = partials.into_iter();
    let (mut total, mut grads) = it.next().expect("non-empty batch");
    for (t, g) in it {
        total += t;
        grads.add_assign(&g);
    }
    Ok((total * weight, grads))
}

/// Mean deterministic loss over a dataset.
pub fn evaluate_loss(model: &Model, data: &Dataset, mode: ExecMode) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Domain("cannot evaluate the loss of an empty dataset".into()));
    }
    let losses = mode.try_map_range(data.len(), |i| sample_loss(model, &data.examples[i], None, 0.0, None))?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

/// Trains on a seeded `(1 − f, f)` split of `data` and returns the parameters
/// of the epoch with the lowest validation loss.
pub fn train(mut model: Model, data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Domain("cannot train on an empty dataset".into()));
    }
    if data.input_dim() != model.input_dim() {
        return Err(Error::Shape(format!(
            "dataset has {} features, model expects {}",
            data.input_dim(),
            model.input_dim()
        )));
    }
    let seed = config.seed;
    let (train_set, val_set) = split(data, config.validation_fraction, derive_seed(seed, &[0x5B]))?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Domain(format!(
            "dataset of {} examples is too small for a validation split of {}",
            data.len(),
            config.validation_fraction
        )));
    }
    if config.standardize {
        let targets = train_set.targets();
        model.set_scaler(Scaler::fit(
            train_set.examples.iter().map(|e| e.input.as_slice()),
            &targets,
            model.input_dim(),
        ))?;
    }

    let mut adam = AdamState::new(&model.params, config.optimizer);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5C]));
    let mut best = (f64::INFINITY, 0usize, model.params.clone());
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Example> = idx.iter().map(|&i| &train_set.examples[i]).collect();
            let dropout_seed = derive_seed(seed, &[0xD1, epoch as u64, b as u64]);
            let (loss, grads) = batch_gradient(&model, &batch, dropout_seed, config.exec).map_err(|e| match e {
                Error::Domain(reason) => Error::Training {
                    epoch,
                    batch: b,
                    reason,
                },
                other => other,
            })?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: b,
                    reason: format!("non-finite loss {loss}"),
                });
            }
            adam_step(&mut model.params, &grads, &mut adam).map_err(|e| match e {
                Error::Training { reason, .. } => Error::Training {
                    epoch,
                    batch: b,
                    reason,
                },
                other => other,
            })?;
            sum += loss * batch.len() as f64;
        }
        let train_loss = sum / train_set.len() as f64;
        let val_loss = evaluate_loss(&model, &val_set, config.exec)?;
        if !val_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                batch: 0,
                reason: format!("non-finite validation loss {val_loss}"),
            });
        }
        epochs.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.params.clone());
        } else if epoch - best.1 >= config.patience {
            stopped_early = true;
            break;
        }
    }

    let (best_val_loss, best_epoch, params) = best;
    model.params = params;
    Ok(TrainOutcome {
        history: History {
            model: model.name(),
            seed,
            epochs,
            best_epoch,
            best_val_loss,
            stopped_early,
        },
        model,
    })
}
