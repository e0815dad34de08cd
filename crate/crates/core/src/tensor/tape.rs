//! Tape-based reverse-mode differentiation over matrix primitives.
//!
//! Every op evaluates eagerly and appends one node to the [`Tape`]. A
//! [`Var`] is just the index of that node. [`Tape::backward`] walks the
//! nodes in reverse recording order, accumulating each node's gradient
//! from all of its consumers before passing it on. Backward borrows the
//! tape immutably, so forward values are never touched and repeated
//! backward passes give identical gradients.

#![allow(clippy::needless_range_loop)]

use super::matrix::{sigmoid, Axis, Matrix};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The primitive recorded for a node, with whatever it needs for backward.
#[derive(Clone, Debug)]
pub enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Matrix,
        inv_std: Vec<f64>,
    },
    Swish(Var),
    Mean(Var, Axis),
    CrossEntropy {
        logits: Var,
        label: usize,
        probs: Vec<f64>,
    },
    RepeatRows(Var),
    Concat(Vec<Var>),
    Scale(Var, f64),
    AddBias(Var, Var),
    Add(Var, Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Ordered record of evaluated ops.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the output w.r.t. `v`, or `None` if `v` does not
    /// influence the output.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Like [`Gradients::get`] but returns zeros shaped like `like` when
    /// the node received no gradient.
    pub fn get_or_zeros(&self, v: Var, like: &Matrix) -> Matrix {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(like.rows(), like.cols()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn op(&self, v: Var) -> &Op {
        &self.nodes[v.0].op
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = self.value(a).softmax_rows();
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Row-wise layer normalisation with a `1×n` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let n = xv.cols();
        if n == 0 || g.shape() != (1, n) || b.shape() != (1, n) {
            return Err(Error::Shape {
                op: "layer_norm",
                left: xv.shape(),
                right: g.shape(),
            });
        }
        let mut normalized = xv.clone();
        let mut out = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.rows());
        for r in 0..xv.rows() {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let istd = 1.0 / (var + eps).sqrt();
            inv_std.push(istd);
            for c in 0..n {
                let h = (row[c] - mean) * istd;
                normalized.set(r, c, h);
                out.set(r, c, g.get(0, c) * h + b.get(0, c));
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
        ))
    }

    /// Elementwise `x·sigmoid(x)`.
    pub fn swish(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v * sigmoid(v));
        self.push(value, Op::Swish(a))
    }

    pub fn mean_axis(&mut self, a: Var, axis: Axis) -> Result<Var> {
        let av = self.value(a);
        if av.rows() == 0 || av.cols() == 0 {
            return Err(Error::EmptyInput(format!(
                "mean over a {}x{} matrix",
                av.rows(),
                av.cols()
            )));
        }
        let value = av.mean_axis(axis);
        Ok(self.push(value, Op::Mean(a, axis)))
    }

    /// `-log softmax(logits)[label]` for a `1×k` logit row, via log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rows() != 1 || label >= lv.cols() {
            return Err(Error::InvalidArgument(format!(
                "cross entropy needs a 1xk logit row and label < k, got {:?} and label {label}",
                lv.shape()
            )));
        }
        let row = lv.row(0);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum_exp.ln();
        let loss = lse - row[label];
        let probs = row.iter().map(|v| (v - lse).exp()).collect();
        Ok(self.push(
            Matrix::row_vector(vec![loss]),
            Op::CrossEntropy {
                logits,
                label,
                probs,
            },
        ))
    }

    pub fn repeat_rows(&mut self, a: Var, times: usize) -> Result<Var> {
        let value = self.value(a).repeat_rows(times)?;
        Ok(self.push(value, Op::RepeatRows(a)))
    }

    /// Horizontal concatenation of row vectors.
    pub fn concat_vectors(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::concat_row_vectors(&values)?;
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    pub fn scalar_scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        self.push(value, Op::Scale(a, s))
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let value = self.value(a).add_bias(self.value(bias))?;
        Ok(self.push(value, Op::AddBias(a, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Back-propagates from a scalar (`1×1`) node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.shape() != (1, 1) {
            return Err(Error::InvalidArgument(format!(
                "backward needs a 1x1 output, got {:?}",
                out.shape()
            )));
        }
        self.backward_with(output, Matrix::filled(1, 1, 1.0))
    }

    /// Back-propagates an explicit upstream gradient for `output`.
    pub fn backward_with(&self, output: Var, seed: Matrix) -> Result<Gradients> {
        if seed.shape() != self.value(output).shape() {
            return Err(Error::Shape {
                op: "backward",
                left: self.value(output).shape(),
                right: seed.shape(),
            });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].clone() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul_t(self.value(*b))?;
                    let db = self.value(*a).t_matmul(&g)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose())?,
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut dx = g.clone();
                    for r in 0..y.rows() {
                        let dot: f64 = y.row(r).iter().zip(g.row(r)).map(|(p, q)| p * q).sum();
                        for (d, (yv, gv)) in dx.row_mut(r).iter_mut().zip(y.row(r).iter().zip(g.row(r)))
                        {
                            *d = yv * (gv - dot);
                        }
                    }
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    normalized,
                    inv_std,
                } => {
                    let gv = self.value(*gain);
                    let n = normalized.cols();
                    let mut dx = Matrix::zeros(normalized.rows(), n);
                    let mut dgain = Matrix::zeros(1, n);
                    let mut dbias = Matrix::zeros(1, n);
                    for r in 0..normalized.rows() {
                        let xh = normalized.row(r);
                        let gr = g.row(r);
                        let dxh: Vec<f64> = (0..n).map(|c| gr[c] * gv.get(0, c)).collect();
                        let mean_dxh = dxh.iter().sum::<f64>() / n as f64;
                        let mean_dxh_xh =
                            dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        for c in 0..n {
                            dx.set(r, c, inv_std[r] * (dxh[c] - mean_dxh - xh[c] * mean_dxh_xh));
                            dgain.data_mut()[c] += gr[c] * xh[c];
                            dbias.data_mut()[c] += gr[c];
                        }
                    }
                    accumulate(&mut grads, *x, dx)?;
                    accumulate(&mut grads, *gain, dgain)?;
                    accumulate(&mut grads, *bias, dbias)?;
                }
                Op::Swish(a) => {
                    let xv = self.value(*a);
                    let mut dx = g.clone();
                    for (d, &x) in dx.data_mut().iter_mut().zip(xv.data()) {
                        let s = sigmoid(x);
                        *d *= s + x * s * (1.0 - s);
                    }
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::Mean(a, axis) => {
                    let (rows, cols) = self.value(*a).shape();
                    let dx = match axis {
                        Axis::Rows => {
                            let inv = 1.0 / rows as f64;
                            Matrix::from_fn(rows, cols, |_, c| g.get(0, c) * inv)
                        }
                        Axis::Cols => {
                            let inv = 1.0 / cols as f64;
                            Matrix::from_fn(rows, cols, |r, _| g.get(r, 0) * inv)
                        }
                    };
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::CrossEntropy {
                    logits,
                    label,
                    probs,
                } => {
                    let up = g.get(0, 0);
                    let dx: Vec<f64> = probs
                        .iter()
                        .enumerate()
                        .map(|(k, p)| up * (p - if k == *label { 1.0 } else { 0.0 }))
                        .collect();
                    accumulate(&mut grads, *logits, Matrix::row_vector(dx))?;
                }
                Op::RepeatRows(a) => accumulate(&mut grads, *a, column_sums(&g))?,
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let slice = g.data()[offset..offset + w].to_vec();
                        offset += w;
                        accumulate(&mut grads, *p, Matrix::row_vector(slice))?;
                    }
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.scale(*s))?,
                Op::AddBias(a, b) => {
                    let db = column_sums(&g);
                    accumulate(&mut grads, *a, g)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g)?;
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn column_sums(g: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, g.cols());
    for r in 0..g.rows() {
        for (o, v) in out.data_mut().iter_mut().zip(g.row(r)) {
            *o += v;
        }
    }
    out
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}
