//! The interpretable cross-attention classifier and its two self-attention
//! baselines, all ending in the same head:
//! `layer_norm → swish → linear(h×2)`.

mod checkpoint;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CheckpointHeader};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{
    embedding_cross_attention_on, self_attention_on, temporal_cross_attention_on, AttentionVars,
    AttentionWeights, ScaleMode,
};
use crate::error::{Error, Result};
use crate::tensor::{Axis, Matrix, Tape, Var};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    CrossAttn,
    SelfSsl,
    SelfInf,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::CrossAttn, Variant::SelfSsl, Variant::SelfInf];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::CrossAttn => "cross_attn",
            Variant::SelfSsl => "self_ssl",
            Variant::SelfInf => "self_inf",
        }
    }

    /// Width of the pooled vector entering the head.
    pub fn head_dim(self, d: usize, f: usize) -> usize {
        match self {
            Variant::CrossAttn => 2 * f,
            Variant::SelfSsl | Variant::SelfInf => d,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model variant '{s}'")))
    }
}

/// Classification head parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub ln_gain: Matrix,
    pub ln_bias: Matrix,
    pub w_cls: Matrix,
    pub b_cls: Matrix,
}

/// All learnable weights of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub variant: Variant,
    pub d: usize,
    pub f: usize,
    pub seed: u64,
    /// Embedding branch for `cross_attn`, the self-attention block otherwise.
    pub attention: AttentionWeights,
    /// Temporal branch, `cross_attn` only.
    pub temporal: Option<AttentionWeights>,
    /// `F×D` input projection, `self_inf` only.
    pub input_proj: Option<Matrix>,
    pub head: Head,
    pub scale: ScaleMode,
}

/// Closed-form parameter count for a variant.
pub fn count_params(variant: Variant, d: usize, f: usize) -> usize {
    let h = variant.head_dim(d, f);
    let head = 2 * h + 2 * h + 2;
    let attention = 4 * d * d;
    match variant {
        Variant::CrossAttn | Variant::SelfSsl => attention + head,
        Variant::SelfInf => f * d + attention + head,
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let bound = (1.0 / rows as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
}

impl ModelParams {
    /// Seeded initialisation: every weight matrix is drawn from
    /// `U(-√(1/fan_in), √(1/fan_in))` in [`ModelParams::names`] order; layer
    /// norm gain is 1, all biases 0.
    pub fn init(variant: Variant, d: usize, f: usize, seed: u64) -> Result<Self> {
        if d == 0 || f == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive, got D={d} F={f}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = variant.head_dim(d, f);
        let (input_proj, attention, temporal) = match variant {
            Variant::CrossAttn => {
                let emb = AttentionWeights::cross(uniform(&mut rng, d, d), uniform(&mut rng, d, d));
                let temp = AttentionWeights::cross(uniform(&mut rng, d, d), uniform(&mut rng, d, d));
                (None, emb, Some(temp))
            }
            Variant::SelfSsl | Variant::SelfInf => {
                let proj = (variant == Variant::SelfInf).then(|| uniform(&mut rng, f, d));
                let w_q = uniform(&mut rng, d, d);
                let w_k = uniform(&mut rng, d, d);
                let w_v = uniform(&mut rng, d, d);
                let w_o = uniform(&mut rng, d, d);
                (proj, AttentionWeights::full(w_q, w_k, w_v, w_o), None)
            }
        };
        let head = Head {
            ln_gain: Matrix::filled(1, h, 1.0),
            ln_bias: Matrix::zeros(1, h),
            w_cls: uniform(&mut rng, h, 2),
            b_cls: Matrix::zeros(1, 2),
        };
        Ok(Self {
            variant,
            d,
            f,
            seed,
            attention,
            temporal,
            input_proj,
            head,
            scale: ScaleMode::default(),
        })
    }

    pub fn with_scale(mut self, scale: ScaleMode) -> Self {
        self.scale = scale;
        self
    }

    /// Parameter names in canonical order.
    pub fn names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        match self.variant {
            Variant::CrossAttn => {
                names.extend(["attention.w_q", "attention.w_v", "temporal.w_q", "temporal.w_v"]);
            }
            Variant::SelfSsl | Variant::SelfInf => {
                if self.variant == Variant::SelfInf {
                    names.push("input_proj");
                }
                names.extend(["attention.w_q", "attention.w_k", "attention.w_v", "attention.w_o"]);
            }
        }
        names.extend(["head.ln_gain", "head.ln_bias", "head.w_cls", "head.b_cls"]);
        names
    }

    /// Parameter tensors in [`ModelParams::names`] order.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        if let Some(p) = &self.input_proj {
            out.push(p);
        }
        out.push(&self.attention.w_q);
        if let Some(k) = &self.attention.w_k {
            out.push(k);
        }
        out.push(&self.attention.w_v);
        if let Some(o) = &self.attention.w_o {
            out.push(o);
        }
        if let Some(t) = &self.temporal {
            out.push(&t.w_q);
            out.push(&t.w_v);
        }
        out.extend([&self.head.ln_gain, &self.head.ln_bias, &self.head.w_cls, &self.head.b_cls]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        if let Some(p) = &mut self.input_proj {
            out.push(p);
        }
        out.push(&mut self.attention.w_q);
        if let Some(k) = &mut self.attention.w_k {
            out.push(k);
        }
        out.push(&mut self.attention.w_v);
        if let Some(o) = &mut self.attention.w_o {
            out.push(o);
        }
        if let Some(t) = &mut self.temporal {
            out.push(&mut t.w_q);
            out.push(&mut t.w_v);
        }
        let h = &mut self.head;
        out.extend([&mut h.ln_gain, &mut h.ln_bias, &mut h.w_cls, &mut h.b_cls]);
        out
    }

    /// Rebuilds a parameter set from tensors in canonical order.
    pub fn from_tensors(
        variant: Variant,
        d: usize,
        f: usize,
        seed: u64,
        scale: ScaleMode,
        tensors: Vec<Matrix>,
    ) -> Result<Self> {
        let mut params = Self::init(variant, d, f, 0)?;
        params.seed = seed;
        params.scale = scale;
        let slots = params.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::InvalidArgument(format!(
                "{variant} expects {} tensors, got {}",
                slots.len(),
                tensors.len()
            )));
        }
        for (slot, t) in slots.into_iter().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(Error::Shape {
                    op: "from_tensors",
                    left: slot.shape(),
                    right: t.shape(),
                });
            }
            *slot = t;
        }
        Ok(params)
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// Model inputs for one utterance. `inf` is the normalised `1×F`
/// informed-feature row.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub ssl: &'a Matrix,
    pub inf: &'a Matrix,
}

/// Tape handles produced by a differentiable forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    /// Parameter leaves, in [`ModelParams::names`] order.
    pub params: Vec<Var>,
    pub pooled: Var,
    pub logits: Var,
    pub primary: AttentionVars,
    pub temporal: Option<AttentionVars>,
}

/// Output of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: [f64; 2],
    /// 0 = HC, 1 = PD.
    pub predicted_label: usize,
    /// `S_emb` (`D×F`) for `cross_attn`, the self-attention scores otherwise.
    pub primary_scores: Matrix,
    /// `S_temp` (`T×F`), `cross_attn` only.
    pub temporal_scores: Option<Matrix>,
}

impl Prediction {
    pub fn embedding_scores(&self) -> Option<&Matrix> {
        self.temporal_scores.as_ref().map(|_| &self.primary_scores)
    }
}

pub fn argmax2(logits: [f64; 2]) -> usize {
    usize::from(logits[1] > logits[0])
}

impl ModelParams {
    fn check_sample(&self, sample: &Sample<'_>) -> Result<()> {
        if self.variant != Variant::SelfSsl && sample.inf.shape() != (1, self.f) {
            return Err(Error::Schema(format!(
                "model expects a 1x{} informed vector, got {:?}",
                self.f,
                sample.inf.shape()
            )));
        }
        if self.variant != Variant::SelfInf && sample.ssl.cols() != self.d {
            return Err(Error::Shape {
                op: "forward(x_ssl)",
                left: sample.ssl.shape(),
                right: (sample.ssl.rows(), self.d),
            });
        }
        Ok(())
    }

    /// Records the full forward pass on `tape`.
    pub fn forward_on(&self, tape: &mut Tape, sample: Sample<'_>) -> Result<ForwardVars> {
        self.check_sample(&sample)?;
        let params: Vec<Var> = self.tensors().into_iter().map(|t| tape.leaf(t.clone())).collect();
        let n = params.len();
        let (ln_gain, ln_bias, w_cls, b_cls) = (params[n - 4], params[n - 3], params[n - 2], params[n - 1]);

        let (pooled, primary, temporal) = match self.variant {
            Variant::CrossAttn => {
                let x = tape.leaf(sample.ssl.clone());
                let inf = tape.leaf(sample.inf.clone());
                let emb = embedding_cross_attention_on(tape, x, inf, params[0], params[1], self.scale)?;
                let temp = temporal_cross_attention_on(tape, x, inf, params[2], params[3], self.scale)?;
                let emb_pooled = tape.mean_axis(emb.enriched, Axis::Rows)?;
                let temp_pooled = tape.mean_axis(temp.enriched, Axis::Rows)?;
                let z = tape.concat_vectors(&[emb_pooled, temp_pooled])?;
                (z, emb, Some(temp))
            }
            Variant::SelfSsl => {
                let x = tape.leaf(sample.ssl.clone());
                let att = self_attention_on(tape, x, params[0], params[1], params[2], params[3])?;
                let pooled = tape.mean_axis(att.enriched, Axis::Rows)?;
                (pooled, att, None)
            }
            Variant::SelfInf => {
                let inf = tape.leaf(sample.inf.clone());
                let x = tape.matmul(inf, params[0])?;
                let att = self_attention_on(tape, x, params[1], params[2], params[3], params[4])?;
                let pooled = tape.mean_axis(att.enriched, Axis::Rows)?;
                (pooled, att, None)
            }
        };
        let normed = tape.layer_norm(pooled, ln_gain, ln_bias, LAYER_NORM_EPS)?;
        let act = tape.swish(normed);
        let proj = tape.matmul(act, w_cls)?;
        let logits = tape.add_bias(proj, b_cls)?;
        Ok(ForwardVars {
            params,
            pooled,
            logits,
            primary,
            temporal,
        })
    }

    fn prediction_from(&self, tape: &Tape, vars: &ForwardVars) -> Result<Prediction> {
        let l = tape.value(vars.logits);
        let logits = [l.get(0, 0), l.get(0, 1)];
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "model logits".into(),
            });
        }
        Ok(Prediction {
            logits,
            predicted_label: argmax2(logits),
            primary_scores: tape.value(vars.primary.scores).clone(),
            temporal_scores: vars.temporal.map(|t| tape.value(t.scores).clone()),
        })
    }

    pub fn forward(&self, sample: Sample<'_>) -> Result<Prediction> {
        let mut tape = Tape::new();
        let vars = self.forward_on(&mut tape, sample)?;
        self.prediction_from(&tape, &vars)
    }

    /// Cross-entropy loss, its gradient for every parameter (canonical
    /// order) and the prediction, for one labelled sample.
    pub fn loss_and_grads(&self, sample: Sample<'_>, label: usize) -> Result<(f64, Vec<Matrix>, Prediction)> {
        let mut tape = Tape::new();
        let vars = self.forward_on(&mut tape, sample)?;
        let loss = tape.cross_entropy(vars.logits, label)?;
        let grads = tape.backward(loss)?;
        let pred = self.prediction_from(&tape, &vars)?;
        let params = self.tensors();
        let g = vars
            .params
            .iter()
            .zip(params)
            .map(|(&v, p)| grads.get_or_zeros(v, p))
            .collect();
        Ok((tape.value(loss).get(0, 0), g, pred))
    }

    pub fn loss(&self, sample: Sample<'_>, label: usize) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = self.forward_on(&mut tape, sample)?;
        let loss = tape.cross_entropy(vars.logits, label)?;
        Ok(tape.value(loss).get(0, 0))
    }
}

fn require_variant(p: &ModelParams, v: Variant) -> Result<()> {
    if p.variant == v {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "expected {v} parameters, got {}",
            p.variant
        )))
    }
}

pub fn forward_cross_attn(p: &ModelParams, x_ssl: &Matrix, x_inf: &Matrix) -> Result<Prediction> {
    require_variant(p, Variant::CrossAttn)?;
    p.forward(Sample { ssl: x_ssl, inf: x_inf })
}

pub fn forward_self_ssl(p: &ModelParams, x_ssl: &Matrix) -> Result<Prediction> {
    require_variant(p, Variant::SelfSsl)?;
    let empty = Matrix::zeros(1, p.f);
    p.forward(Sample { ssl: x_ssl, inf: &empty })
}

pub fn forward_self_inf(p: &ModelParams, x_inf: &Matrix) -> Result<Prediction> {
    require_variant(p, Variant::SelfInf)?;
    let empty = Matrix::zeros(1, p.d);
    p.forward(Sample { ssl: &empty, inf: x_inf })
}
