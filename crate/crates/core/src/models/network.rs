//! Forecasting networks: a mean tower φ, and optionally a scale tower ψ or a
//! single free scale, over a fixed input/target standardization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::{Backbone, ModelSpec, Uncertainty};
use crate::error::{shape_check, Error, Result};
use crate::nn::{Activation, DenseLayer, LstmLayer, ParamId, ParamStore, Tape, Var};
use crate::rng::derive_seed;
use crate::stats::{mean, mean_and_sample_std, pop_std};

/// Fixed affine maps applied around the trainable towers: inputs are
/// standardized column-wise and the network output is mapped back to raw
/// monetary units. Fitted on the training split, never trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
}

impl Scaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            feature_mean: vec![0.0; dim],
            feature_scale: vec![1.0; dim],
            target_mean: 0.0,
            target_scale: 1.0,
        }
    }

    pub fn fit<'a>(inputs: impl Iterator<Item = &'a [f64]>, targets: &[f64], dim: usize) -> Self {
        let rows: Vec<&[f64]> = inputs.collect();
        let guard = |s: f64| if s > 1e-12 && s.is_finite() { s } else { 1.0 };
        let mut feature_mean = Vec::with_capacity(dim);
        let mut feature_scale = Vec::with_capacity(dim);
        for j in 0..dim {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            feature_mean.push(mean(&col));
            feature_scale.push(guard(pop_std(&col)));
        }
        Self {
            feature_mean,
            feature_scale,
            target_mean: mean(targets),
            target_scale: guard(pop_std(targets)),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tower {
    Dense {
        hidden: Vec<DenseLayer>,
        out: DenseLayer,
    },
    Lstm {
        steps: usize,
        recurrent: Vec<LstmLayer>,
        hidden: Vec<DenseLayer>,
        out: DenseLayer,
    },
}

/// Inverted-dropout mask source.
pub struct Dropout<'r> {
    pub p: f64,
    pub rng: &'r mut ChaCha8Rng,
}

impl Dropout<'_> {
    fn apply(&mut self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        if self.p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.p;
        let n = tape.value(x).len();
        let mask = (0..n)
            .map(|_| if self.rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        tape.mask(x, mask)
    }
}

impl Tower {
    fn init(spec: &ModelSpec, prefix: &str, input_dim: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        let dense_stack = |store: &mut ParamStore, rng: &mut ChaCha8Rng, mut width: usize| {
            let mut hidden = Vec::with_capacity(spec.dense.len());
            for (k, &size) in spec.dense.iter().enumerate() {
                hidden.push(DenseLayer::init(
                    store,
                    &format!("{prefix}.dense{k}"),
                    width,
                    size,
                    Activation::Relu,
                    rng,
                ));
                width = size;
            }
            let out = DenseLayer::init(store, &format!("{prefix}.out"), width, 1, Activation::Identity, rng);
            (hidden, out)
        };
        match spec.backbone {
            Backbone::Dense => {
                let (hidden, out) = dense_stack(store, rng, input_dim);
                Tower::Dense { hidden, out }
            }
            Backbone::Lstm => {
                let steps = input_dim - 2;
                let mut width = 1;
                let mut recurrent = Vec::with_capacity(spec.lstm.len());
                for (k, &size) in spec.lstm.iter().enumerate() {
                    recurrent.push(LstmLayer::init(store, &format!("{prefix}.lstm{k}"), width, size, rng));
                    width = size;
                }
                let (hidden, out) = dense_stack(store, rng, width + 2);
                Tower::Lstm {
                    steps,
                    recurrent,
                    hidden,
                    out,
                }
            }
        }
    }

    /// Raw (standardized-space) scalar output for a standardized input.
    fn forward(&self, tape: &mut Tape<'_>, x: &[f64], mut dropout: Option<&mut Dropout<'_>>) -> Result<Var> {
        let (hidden, out, mut h) = match self {
            Tower::Dense { hidden, out } => (hidden, out, tape.input(x)),
            Tower::Lstm {
                steps,
                recurrent,
                hidden,
                out,
            } => {
                let mut seq: Vec<Var> = x[..*steps].iter().map(|v| tape.input(&[*v])).collect();
                for layer in recurrent {
                    seq = layer.sequence(tape, &seq)?;
                }
                let last = *seq.last().ok_or_else(|| Error::Shape("empty LSTM sequence".into()))?;
                let moments = tape.input(&x[*steps..]);
                (hidden, out, tape.concat(&[last, moments]))
            }
        };
        for layer in hidden {
            h = layer.forward(tape, h)?;
            if let Some(d) = dropout.as_deref_mut() {
                h = d.apply(tape, h)?;
            }
        }
        out.forward(tape, h)
    }

    fn param_ids(&self) -> Vec<ParamId> {
        let dense_ids = |ls: &[DenseLayer], out: &DenseLayer| {
            ls.iter()
                .chain(std::iter::once(out))
                .flat_map(|l| [l.w, l.b])
                .collect::<Vec<_>>()
        };
        match self {
            Tower::Dense { hidden, out } => dense_ids(hidden, out),
            Tower::Lstm {
                recurrent, hidden, out, ..
            } => recurrent
                .iter()
                .flat_map(|l| [l.w_f, l.w_i, l.w_c, l.w_o, l.b_f, l.b_i, l.b_c, l.b_o])
                .chain(dense_ids(hidden, out))
                .collect(),
        }
    }
}

/// Tape handles for one forward pass, in raw target units.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub mu: Var,
    pub scale: Option<Var>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub y_hat: f64,
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    input_dim: usize,
    seed: u64,
    pub(crate) params: ParamStore,
    pub(crate) scaler: Scaler,
    phi: Tower,
    psi: Option<Tower>,
    hom: Option<ParamId>,
}

/// Initializes a model for inputs of length `input_dim` (`T + 2`).
pub fn build(spec: &ModelSpec, input_dim: usize, seed: u64) -> Result<Model> {
    spec.validate()?;
    if input_dim < 3 || (spec.backbone == Backbone::Lstm && input_dim < 4) {
        return Err(Error::Config(format!("input dimension {input_dim} is too small")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let phi = Tower::init(spec, "phi", input_dim, &mut params, &mut rng);
    let (psi, hom) = match spec.uncertainty {
        Uncertainty::Heteroscedastic => (Some(Tower::init(spec, "psi", input_dim, &mut params, &mut rng)), None),
        Uncertainty::Homoscedastic => (None, Some(params.zeros("b_hom", 1, 1))),
        _ => (None, None),
    };
    Ok(Model {
        spec: spec.clone(),
        input_dim,
        seed,
        params,
        scaler: Scaler::identity(input_dim),
        phi,
        psi,
        hom,
    })
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        self.spec.name()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn set_scaler(&mut self, scaler: Scaler) -> Result<()> {
        shape_check(
            scaler.feature_mean.len() == self.input_dim && scaler.feature_scale.len() == self.input_dim,
            || "scaler dimension does not match the model input".to_string(),
        )?;
        self.scaler = scaler;
        Ok(())
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn phi_param_ids(&self) -> Vec<ParamId> {
        self.phi.param_ids()
    }

    pub fn psi_param_ids(&self) -> Vec<ParamId> {
        self.psi.as_ref().map(Tower::param_ids).unwrap_or_default()
    }

    pub fn hom_param_id(&self) -> Option<ParamId> {
        self.hom
    }

    /// Records a forward pass for one flattened feature vector.
    pub fn forward<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        x: &[f64],
        dropout: Option<&mut Dropout<'_>>,
    ) -> Result<ForwardVars> {
        shape_check(x.len() == self.input_dim, || {
            format!("model expects {} inputs, got {}", self.input_dim, x.len())
        })?;
        let xs = self.scaler.apply(x);
        let s = &self.scaler;
        let out = self.phi.forward(tape, &xs, dropout)?;
        let mu = tape.scale_shift(out, s.target_scale, s.target_mean);
        let pre = match (&self.psi, self.hom) {
            (Some(psi), _) => Some(psi.forward(tape, &xs, None)?),
            (None, Some(id)) => Some(tape.param(id)),
            _ => None,
        };
        let scale = pre.map(|p| {
            let g = tape.elu_plus_one(p, self.spec.alpha);
            let raw = tape.scale_shift(g, s.target_scale, 0.0);
            tape.floor(raw, self.spec.floor)
        });
        Ok(ForwardVars { mu, scale })
    }

    /// Per-sample training loss: absolute error for MAE-trained models, Laplace NLL otherwise.
    pub fn loss<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        x: &[f64],
        target: f64,
        dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        let fv = self.forward(tape, x, dropout)?;
        match fv.scale {
            Some(b) => tape.laplace_nll(target, fv.mu, b),
            None => tape.abs_error(target, fv.mu),
        }
    }

    /// Deterministic prediction; the scale is the homoscedastic or heteroscedastic `b`.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let mut tape = Tape::new(&self.params);
        let fv = self.forward(&mut tape, x, None)?;
        Ok(Prediction {
            y_hat: tape.scalar(fv.mu)?,
            scale: fv.scale.map(|b| tape.scalar(b)).transpose()?,
        })
    }

    /// Learned homoscedastic scale in raw units.
    pub fn b_hom(&self) -> Option<f64> {
        self.hom.map(|id| {
            let g = crate::aleatoric::elu_plus_one(self.params.data(id)[0], self.spec.alpha);
            (g * self.scaler.target_scale).max(self.spec.floor)
        })
    }

    /// `n_samples` forward passes with dropout active; returns the sample mean
    /// and sample standard deviation of the mean output.
    pub fn mc_dropout_predict(&self, x: &[f64], n_samples: usize, seed: u64) -> Result<(f64, f64)> {
        if n_samples < 2 {
            return Err(Error::Domain(format!(
                "MC dropout needs at least 2 samples, got {n_samples}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xD0]));
        let mut samples = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let mut tape = Tape::new(&self.params);
            let mut d = Dropout {
                p: self.spec.dropout_p,
                rng: &mut rng,
            };
            let fv = self.forward(&mut tape, x, Some(&mut d))?;
            samples.push(tape.scalar(fv.mu)?);
        }
        Ok(mean_and_sample_std(&samples))
    }

    /// Rebuilds the model with the given parameter values (checkpoint loading).
    pub(crate) fn from_parts(
        spec: &ModelSpec,
        input_dim: usize,
        seed: u64,
        scaler: Scaler,
        params: &[crate::nn::Param],
    ) -> Result<Self> {
        let mut m = build(spec, input_dim, seed)?;
        m.params.load_from(params)?;
        m.set_scaler(scaler)?;
        Ok(m)
    }
}
