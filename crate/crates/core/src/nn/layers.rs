//! Dense layers and the LSTM cell, both as standalone parameter blocks and as
//! handles into a [`ParamStore`] that record onto a [`Tape`].

use rand::Rng;

use super::activation::{sigmoid, Activation};
use super::params::{ParamId, ParamStore};
use super::tape::{affine_into, Tape, Var};
use crate::error::{shape_check, Result};

/// Owned weights of a single dense layer, `activation(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayerParams {
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub activation: Activation,
}

impl DenseLayerParams {
    pub fn new(weights: Vec<f64>, bias: Vec<f64>, in_dim: usize, activation: Activation) -> Result<Self> {
        shape_check(weights.len() == bias.len() * in_dim, || {
            format!(
                "dense weights of length {} do not match {}x{}",
                weights.len(),
                bias.len(),
                in_dim
            )
        })?;
        Ok(Self {
            weights,
            bias,
            in_dim,
            activation,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }
}

pub fn dense_forward(params: &DenseLayerParams, input: &[f64]) -> Result<Vec<f64>> {
    shape_check(input.len() == params.in_dim, || {
        format!("dense layer expects {} inputs, got {}", params.in_dim, input.len())
    })?;
    let mut out = Vec::with_capacity(params.out_dim());
    affine_into(&params.weights, &params.bias, input, &mut out);
    out.iter_mut().for_each(|v| *v = params.activation.apply(*v));
    Ok(out)
}

/// Owned weights of one LSTM cell. Every gate matrix is `hidden × (hidden + input)`
/// and multiplies the concatenation `[h_{t-1}, x_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub hidden: usize,
    pub input: usize,
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_c: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let m = vec![0.0; hidden * (hidden + input)];
        let v = vec![0.0; hidden];
        Self {
            hidden,
            input,
            w_f: m.clone(),
            w_i: m.clone(),
            w_c: m.clone(),
            w_o: m,
            b_f: v.clone(),
            b_i: v.clone(),
            b_c: v.clone(),
            b_o: v,
        }
    }

    fn validate(&self) -> Result<()> {
        let m = self.hidden * (self.hidden + self.input);
        let ok = [&self.w_f, &self.w_i, &self.w_c, &self.w_o]
            .iter()
            .all(|w| w.len() == m)
            && [&self.b_f, &self.b_i, &self.b_c, &self.b_o]
                .iter()
                .all(|b| b.len() == self.hidden);
        shape_check(ok, || "LSTM gate matrices disagree in shape".to_string())
    }
}

/// One LSTM step:
///
/// ```text
/// f = σ(W_f [h, x] + b_f)      i = σ(W_i [h, x] + b_i)
/// c' = f ⊙ c + i ⊙ tanh(W_c [h, x] + b_c)
/// o = σ(W_o [h, x] + b_o)      h' = o ⊙ tanh(c')
/// ```
pub fn lstm_cell_step(
    params: &LstmCellParams,
    h_prev: &[f64],
    c_prev: &[f64],
    x_t: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    shape_check(
        h_prev.len() == params.hidden && c_prev.len() == params.hidden && x_t.len() == params.input,
        || {
            format!(
                "LSTM step expects h,c of {} and x of {}, got {}, {}, {}",
                params.hidden,
                params.input,
                h_prev.len(),
                c_prev.len(),
                x_t.len()
            )
        },
    )?;
    let hx: Vec<f64> = h_prev.iter().chain(x_t).copied().collect();
    let mut f = Vec::new();
    let mut i = Vec::new();
    let mut g = Vec::new();
    let mut o = Vec::new();
    affine_into(&params.w_f, &params.b_f, &hx, &mut f);
    affine_into(&params.w_i, &params.b_i, &hx, &mut i);
    affine_into(&params.w_c, &params.b_c, &hx, &mut g);
    affine_into(&params.w_o, &params.b_o, &hx, &mut o);
    let mut h = Vec::with_capacity(params.hidden);
    let mut c = Vec::with_capacity(params.hidden);
    for k in 0..params.hidden {
        let ck = sigmoid(f[k]) * c_prev[k] + sigmoid(i[k]) * g[k].tanh();
        c.push(ck);
        h.push(sigmoid(o[k]) * ck.tanh());
    }
    Ok((h, c))
}

/// Dense layer whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let w = store.glorot(format!("{name}.w"), out_dim, in_dim, rng);
        let b = store.zeros(format!("{name}.b"), out_dim, 1);
        Self {
            w,
            b,
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let z = tape.affine(self.w, self.b, x)?;
        Ok(tape.activate(z, self.activation))
    }

    /// Copies the current weights out of `store`.
    pub fn snapshot(&self, store: &ParamStore) -> DenseLayerParams {
        DenseLayerParams {
            weights: store.data(self.w).to_vec(),
            bias: store.data(self.b).to_vec(),
            in_dim: self.in_dim,
            activation: self.activation,
        }
    }
}

/// LSTM layer whose gate weights live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub hidden: usize,
    pub input: usize,
    pub w_f: ParamId,
    pub w_i: ParamId,
    pub w_c: ParamId,
    pub w_o: ParamId,
    pub b_f: ParamId,
    pub b_i: ParamId,
    pub b_c: ParamId,
    pub b_o: ParamId,
}

impl LstmLayer {
    /// Glorot-uniform gate matrices, zero biases except `b_f = 1`.
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let cols = hidden + input;
        let w_f = store.glorot(format!("{name}.w_f"), hidden, cols, rng);
        let w_i = store.glorot(format!("{name}.w_i"), hidden, cols, rng);
        let w_c = store.glorot(format!("{name}.w_c"), hidden, cols, rng);
        let w_o = store.glorot(format!("{name}.w_o"), hidden, cols, rng);
        let b_f = store.filled(format!("{name}.b_f"), hidden, 1, 1.0);
        let b_i = store.zeros(format!("{name}.b_i"), hidden, 1);
        let b_c = store.zeros(format!("{name}.b_c"), hidden, 1);
        let b_o = store.zeros(format!("{name}.b_o"), hidden, 1);
        Self {
            hidden,
            input,
            w_f,
            w_i,
            w_c,
            w_o,
            b_f,
            b_i,
            b_c,
            b_o,
        }
    }

    pub fn step(&self, tape: &mut Tape<'_>, h: Var, c: Var, x: Var) -> Result<(Var, Var)> {
        let hx = tape.concat(&[h, x]);
        let f = tape.affine(self.w_f, self.b_f, hx)?;
        let f = tape.activate(f, Activation::Sigmoid);
        let i = tape.affine(self.w_i, self.b_i, hx)?;
        let i = tape.activate(i, Activation::Sigmoid);
        let g = tape.affine(self.w_c, self.b_c, hx)?;
        let g = tape.activate(g, Activation::Tanh);
        let o = tape.affine(self.w_o, self.b_o, hx)?;
        let o = tape.activate(o, Activation::Sigmoid);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let tc = tape.activate(c_next, Activation::Tanh);
        let h_next = tape.mul(o, tc)?;
        Ok((h_next, c_next))
    }

    /// Runs the layer over a sequence from zero state and returns every hidden state.
    pub fn sequence(&self, tape: &mut Tape<'_>, xs: &[Var]) -> Result<Vec<Var>> {
        let zeros = vec![0.0; self.hidden];
        let mut h = tape.input(&zeros);
        let mut c = tape.input(&zeros);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            (h, c) = self.step(tape, h, c, x)?;
            out.push(h);
        }
        Ok(out)
    }

    pub fn snapshot(&self, store: &ParamStore) -> LstmCellParams {
        let d = |id| store.data(id).to_vec();
        LstmCellParams {
            hidden: self.hidden,
            input: self.input,
            w_f: d(self.w_f),
            w_i: d(self.w_i),
            w_c: d(self.w_c),
            w_o: d(self.w_o),
            b_f: d(self.b_f),
            b_i: d(self.b_i),
            b_c: d(self.b_c),
            b_o: d(self.b_o),
        }
    }
}
