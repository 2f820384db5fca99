//! Reverse-mode gradient tape over small dense vectors.
//!
//! A [`Tape`] records every forward operation of a single sample together with
//! its output value. [`Tape::backward`] walks the record in reverse and
//! accumulates `d loss / d p` for every parameter `p` of the borrowed
//! [`ParamStore`]. Recurrent networks are simply unrolled onto the tape, which
//! makes backpropagation through time fall out of the same walk.

use super::activation::Activation;
use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{shape_check, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Affine { w: ParamId, b: ParamId, x: Var },
    Activate { x: Var, act: Activation },
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Box<[Var]>),
    Mask { x: Var, mask: Box<[f64]> },
    ScaleShift { x: Var, scale: f64 },
    EluPlusOne { x: Var, alpha: f64 },
    Floor { x: Var, floor: f64 },
    Total(Box<[Var]>),
    LaplaceNll { target: f64, mu: Var, scale: Var },
    AbsError { target: f64, mu: Var },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

/// `out = W x + b` for a row-major `W` of shape `rows × x.len()`.
#[inline]
pub(crate) fn affine_into(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    let cols = x.len();
    out.clear();
    out.extend(b.iter().enumerate().map(|(r, &bias)| {
        let row = &w[r * cols..(r + 1) * cols];
        bias + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
    }));
}

#[derive(Debug, Clone)]
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(64),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        match self.value(v) {
            [s] => Ok(*s),
            other => Err(Error::Usage(format!("expected a scalar, found length {}", other.len()))),
        }
    }

    /// Records a constant input.
    pub fn input(&mut self, values: &[f64]) -> Var {
        self.push(Op::Leaf, values.to_vec())
    }

    /// Records a parameter tensor as a value (used for free scalars).
    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.params.data(id).to_vec();
        self.push(Op::Param(id), value)
    }

    pub fn affine(&mut self, w: ParamId, b: ParamId, x: Var) -> Result<Var> {
        let wp = self.params.get(w);
        let bp = self.params.get(b);
        let xv = &self.nodes[x.0].value;
        shape_check(wp.cols == xv.len() && wp.rows == bp.len(), || {
            format!(
                "affine `{}` is {}x{} with bias {}, input has length {}",
                wp.name,
                wp.rows,
                wp.cols,
                bp.len(),
                xv.len()
            )
        })?;
        let mut out = Vec::with_capacity(wp.rows);
        affine_into(&wp.data, &bp.data, xv, &mut out);
        Ok(self.push(Op::Affine { w, b, x }, out))
    }

    pub fn activate(&mut self, x: Var, act: Activation) -> Var {
        if act == Activation::Identity {
            return x;
        }
        let out = self.value(x).iter().map(|&v| act.apply(v)).collect();
        self.push(Op::Activate { x, act }, out)
    }

    fn binary(&mut self, a: Var, b: Var, what: &str) -> Result<()> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        shape_check(la == lb, || format!("{what} of lengths {la} and {lb}"))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(Op::Add(a, b), out))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let out = parts.iter().flat_map(|&p| self.value(p).iter().copied()).collect();
        self.push(Op::Concat(parts.into()), out)
    }

    /// Multiplies element-wise by a constant mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        let n = self.value(x).len();
        shape_check(n == mask.len(), || {
            format!("mask of length {} for value of length {n}", mask.len())
        })?;
        let out = self.value(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        Ok(self.push(Op::Mask { x, mask: mask.into() }, out))
    }

    /// `scale * x + shift`, element-wise with constant coefficients.
    pub fn scale_shift(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let out = self.value(x).iter().map(|v| scale * v + shift).collect();
        self.push(Op::ScaleShift { x, scale }, out)
    }

    /// `ELU(α, x) + 1`, element-wise.
    pub fn elu_plus_one(&mut self, x: Var, alpha: f64) -> Var {
        let out = self
            .value(x)
            .iter()
            .map(|&v| crate::aleatoric::elu_plus_one(v, alpha))
            .collect();
        self.push(Op::EluPlusOne { x, alpha }, out)
    }

    /// `max(x, floor)`, element-wise.
    pub fn floor(&mut self, x: Var, floor: f64) -> Var {
        let out = self.value(x).iter().map(|v| v.max(floor)).collect();
        self.push(Op::Floor { x, floor }, out)
    }

    /// Sum of every element of every part, as a scalar.
    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let total = parts.iter().flat_map(|&p| self.value(p).iter()).sum();
        self.push(Op::Total(parts.into()), vec![total])
    }

    /// Per-sample Laplace negative log-likelihood `log b + |y - μ| / b` (scalars).
    pub fn laplace_nll(&mut self, target: f64, mu: Var, scale: Var) -> Result<Var> {
        let m = self.scalar(mu)?;
        let b = self.scalar(scale)?;
        if b.is_nan() || b <= 0.0 {
            return Err(Error::Domain(format!("Laplace scale must be positive, got {b}")));
        }
        let value = b.ln() + (target - m).abs() / b;
        Ok(self.push(Op::LaplaceNll { target, mu, scale }, vec![value]))
    }

    /// Absolute error `|y - μ|` of a scalar prediction.
    pub fn abs_error(&mut self, target: f64, mu: Var) -> Result<Var> {
        let m = self.scalar(mu)?;
        Ok(self.push(Op::AbsError { target, mu }, vec![(target - m).abs()]))
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self.params);
        self.backward_into(loss, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Adds `seed * d loss / d p` into `grads`.
    pub fn backward_into(&self, loss: Var, seed: f64, grads: &mut Gradients) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, found length {}",
                self.value(loss).len()
            )));
        }
        shape_check(grads.len() == self.params.len(), || {
            format!(
                "gradient buffer holds {} tensors, store has {}",
                grads.len(),
                self.params.len()
            )
        })?;

        let mut adj: Vec<Vec<f64>> = Vec::with_capacity(loss.0 + 1);
        adj.extend(self.nodes[..=loss.0].iter().map(|n| vec![0.0; n.value.len()]));
        adj[loss.0][0] = seed;

        for i in (0..=loss.0).rev() {
            let g = std::mem::take(&mut adj[i]);
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    for (a, d) in grads.get_mut(*id).iter_mut().zip(&g) {
                        *a += d;
                    }
                }
                Op::Affine { w, b, x } => {
                    let wv = self.params.data(*w);
                    let xv = &self.nodes[x.0].value;
                    let cols = xv.len();
                    {
                        let gw = grads.get_mut(*w);
                        for (r, &gr) in g.iter().enumerate() {
                            if gr != 0.0 {
                                let row = &mut gw[r * cols..(r + 1) * cols];
                                for (a, &xc) in row.iter_mut().zip(xv) {
                                    *a += gr * xc;
                                }
                            }
                        }
                    }
                    for (a, &gr) in grads.get_mut(*b).iter_mut().zip(&g) {
                        *a += gr;
                    }
                    let ax = &mut adj[x.0];
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            let row = &wv[r * cols..(r + 1) * cols];
                            for (a, &wrc) in ax.iter_mut().zip(row) {
                                *a += gr * wrc;
                            }
                        }
                    }
                }
                Op::Activate { x, act } => {
                    let xv = &self.nodes[x.0].value;
                    for (((a, &gi), &xi), &yi) in adj[x.0].iter_mut().zip(&g).zip(xv).zip(&node.value) {
                        *a += gi * act.derivative(xi, yi);
                    }
                }
                Op::Add(a, b) => {
                    for (s, &gi) in adj[a.0].iter_mut().zip(&g) {
                        *s += gi;
                    }
                    for (s, &gi) in adj[b.0].iter_mut().zip(&g) {
                        *s += gi;
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let da: Vec<f64> = g.iter().zip(vb).map(|(gi, y)| gi * y).collect();
                    let db: Vec<f64> = g.iter().zip(va).map(|(gi, x)| gi * x).collect();
                    for (s, d) in adj[a.0].iter_mut().zip(da) {
                        *s += d;
                    }
                    for (s, d) in adj[b.0].iter_mut().zip(db) {
                        *s += d;
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts.iter() {
                        let n = self.nodes[p.0].value.len();
                        for (s, &gi) in adj[p.0].iter_mut().zip(&g[offset..offset + n]) {
                            *s += gi;
                        }
                        offset += n;
                    }
                }
                Op::Mask { x, mask } => {
                    for ((s, &gi), &m) in adj[x.0].iter_mut().zip(&g).zip(mask.iter()) {
                        *s += gi * m;
                    }
                }
                Op::ScaleShift { x, scale } => {
                    for (s, &gi) in adj[x.0].iter_mut().zip(&g) {
                        *s += gi * scale;
                    }
                }
                Op::EluPlusOne { x, alpha } => {
                    let xv = &self.nodes[x.0].value;
                    for ((s, &gi), &xi) in adj[x.0].iter_mut().zip(&g).zip(xv) {
                        let d = if xi < 0.0 { alpha * xi.exp() } else { 1.0 };
                        *s += gi * d;
                    }
                }
                Op::Floor { x, floor } => {
                    let xv = &self.nodes[x.0].value;
                    for ((s, &gi), &xi) in adj[x.0].iter_mut().zip(&g).zip(xv) {
                        if xi >= *floor {
                            *s += gi;
                        }
                    }
                }
                Op::Total(parts) => {
                    for p in parts.iter() {
                        adj[p.0].iter_mut().for_each(|s| *s += g[0]);
                    }
                }
                Op::LaplaceNll { target, mu, scale } => {
                    let m = self.nodes[mu.0].value[0];
                    let b = self.nodes[scale.0].value[0];
                    let r = target - m;
                    adj[mu.0][0] += g[0] * -signum0(r) / b;
                    adj[scale.0][0] += g[0] * (1.0 / b - r.abs() / (b * b));
                }
                Op::AbsError { target, mu } => {
                    let m = self.nodes[mu.0].value[0];
                    adj[mu.0][0] += g[0] * signum0(m - target);
                }
            }
        }
        Ok(())
    }
}

/// Sign with `signum0(0) == 0`, the subgradient used for `|·|`.
#[inline]
pub(crate) fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
