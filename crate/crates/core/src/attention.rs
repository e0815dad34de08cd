//! Single-head attention blocks.
//!
//! The two cross-attention branches use the informed-feature vector
//! directly as the key: there is no key projection, the vector is only
//! repeated along the axis the branch contracts over. Each branch owns a
//! query and a value projection and nothing else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tape, Var};

/// Which dimension goes under the square root in the score scaling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// The dimension contracted by the score product: `T` for the
    /// embedding branch, `D` for the temporal branch.
    #[default]
    Contracted,
    /// The informed-feature count `F` for both branches.
    KeyDim,
}

impl std::str::FromStr for ScaleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contracted" => Ok(ScaleMode::Contracted),
            "key_dim" => Ok(ScaleMode::KeyDim),
            other => Err(Error::InvalidArgument(format!(
                "unknown scale mode '{other}' (expected contracted|key_dim)"
            ))),
        }
    }
}

impl std::fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScaleMode::Contracted => "contracted",
            ScaleMode::KeyDim => "key_dim",
        })
    }
}

/// Projection matrices of one attention block.
///
/// Cross-attention blocks carry only `w_q` and `w_v`; the self-attention
/// baselines also carry `w_k` and an output projection `w_o`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub w_q: Matrix,
    pub w_v: Matrix,
    pub w_k: Option<Matrix>,
    pub w_o: Option<Matrix>,
}

impl AttentionWeights {
    pub fn cross(w_q: Matrix, w_v: Matrix) -> Self {
        Self {
            w_q,
            w_v,
            w_k: None,
            w_o: None,
        }
    }

    pub fn full(w_q: Matrix, w_k: Matrix, w_v: Matrix, w_o: Matrix) -> Self {
        Self {
            w_q,
            w_v,
            w_k: Some(w_k),
            w_o: Some(w_o),
        }
    }

    pub fn is_cross(&self) -> bool {
        self.w_k.is_none() && self.w_o.is_none()
    }
}

/// Scores and enriched representation of one attention block.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    pub scores: Matrix,
    pub enriched: Matrix,
}

/// Tape handles for a block evaluated during a differentiable forward pass.
#[derive(Clone, Copy, Debug)]
pub struct AttentionVars {
    pub key: Var,
    pub scores: Var,
    pub enriched: Var,
}

impl AttentionVars {
    pub fn output(&self, tape: &Tape) -> AttentionOutput {
        AttentionOutput {
            scores: tape.value(self.scores).clone(),
            enriched: tape.value(self.enriched).clone(),
        }
    }
}

fn check_inputs(tape: &Tape, x_ssl: Var, x_inf: Var, w_q: Var, w_v: Var) -> Result<(usize, usize, usize)> {
    let (t, d) = tape.value(x_ssl).shape();
    let inf = tape.value(x_inf);
    if t == 0 || d == 0 {
        return Err(Error::EmptyInput(format!("SSL sequence is {t}x{d}")));
    }
    if inf.cols() == 0 {
        return Err(Error::EmptyInput("informed vector has no features".into()));
    }
    if inf.rows() != 1 {
        return Err(Error::Shape {
            op: "cross_attention(x_inf)",
            left: inf.shape(),
            right: (1, inf.cols()),
        });
    }
    for w in [w_q, w_v] {
        if tape.value(w).shape() != (d, d) {
            return Err(Error::Shape {
                op: "cross_attention(weights)",
                left: (t, d),
                right: tape.value(w).shape(),
            });
        }
    }
    Ok((t, d, inf.cols()))
}

fn scale_factor(mode: ScaleMode, contracted: usize, features: usize) -> f64 {
    let dim = match mode {
        ScaleMode::Contracted => contracted,
        ScaleMode::KeyDim => features,
    };
    1.0 / (dim as f64).sqrt()
}

/// Embedding cross-attention on a tape.
///
/// `Q = X·W_Q`, `K = repeat(x_inf, T)`, `V = X·W_V`,
/// `S = softmax_rows(Qᵀ·K / √T)` (`D×F`), `Z = V·S` (`T×F`).
pub fn embedding_cross_attention_on(
    tape: &mut Tape,
    x_ssl: Var,
    x_inf: Var,
    w_q: Var,
    w_v: Var,
    scale: ScaleMode,
) -> Result<AttentionVars> {
    let (t, _d, f) = check_inputs(tape, x_ssl, x_inf, w_q, w_v)?;
    let q = tape.matmul(x_ssl, w_q)?;
    let key = tape.repeat_rows(x_inf, t)?;
    let v = tape.matmul(x_ssl, w_v)?;
    let qt = tape.transpose(q);
    let logits = tape.matmul(qt, key)?;
    let logits = tape.scalar_scale(logits, scale_factor(scale, t, f));
    let scores = tape.softmax_rows(logits);
    let enriched = tape.matmul(v, scores)?;
    Ok(AttentionVars {
        key,
        scores,
        enriched,
    })
}

/// Temporal cross-attention on a tape.
///
/// `Q = X·W_Q`, `K = repeat(x_inf, D)`, `V = X·W_V`,
/// `S = softmax_rows(Q·K / √D)` (`T×F`), `Z = Vᵀ·S` (`D×F`).
pub fn temporal_cross_attention_on(
    tape: &mut Tape,
    x_ssl: Var,
    x_inf: Var,
    w_q: Var,
    w_v: Var,
    scale: ScaleMode,
) -> Result<AttentionVars> {
    let (_t, d, f) = check_inputs(tape, x_ssl, x_inf, w_q, w_v)?;
    let q = tape.matmul(x_ssl, w_q)?;
    let key = tape.repeat_rows(x_inf, d)?;
    let v = tape.matmul(x_ssl, w_v)?;
    let logits = tape.matmul(q, key)?;
    let logits = tape.scalar_scale(logits, scale_factor(scale, d, f));
    let scores = tape.softmax_rows(logits);
    let vt = tape.transpose(v);
    let enriched = tape.matmul(vt, scores)?;
    Ok(AttentionVars {
        key,
        scores,
        enriched,
    })
}

/// Standard self-attention with output projection, scaled by `√D`.
pub fn self_attention_on(
    tape: &mut Tape,
    x: Var,
    w_q: Var,
    w_k: Var,
    w_v: Var,
    w_o: Var,
) -> Result<AttentionVars> {
    let (t, d) = tape.value(x).shape();
    if t == 0 || d == 0 {
        return Err(Error::EmptyInput(format!("self-attention input is {t}x{d}")));
    }
    let q = tape.matmul(x, w_q)?;
    let key = tape.matmul(x, w_k)?;
    let v = tape.matmul(x, w_v)?;
    let kt = tape.transpose(key);
    let logits = tape.matmul(q, kt)?;
    let logits = tape.scalar_scale(logits, 1.0 / (d as f64).sqrt());
    let scores = tape.softmax_rows(logits);
    let attended = tape.matmul(scores, v)?;
    let enriched = tape.matmul(attended, w_o)?;
    Ok(AttentionVars {
        key,
        scores,
        enriched,
    })
}

/// `softmax_rows(q·keyᵀ/√scale_dim)·v`.
pub fn scaled_dot_attention(q: &Matrix, key: &Matrix, v: &Matrix, scale_dim: usize) -> Result<AttentionOutput> {
    if q.cols() != key.cols() {
        return Err(Error::Shape {
            op: "scaled_dot_attention(q, key)",
            left: q.shape(),
            right: key.shape(),
        });
    }
    if key.rows() != v.rows() {
        return Err(Error::Shape {
            op: "scaled_dot_attention(key, v)",
            left: key.shape(),
            right: v.shape(),
        });
    }
    if scale_dim == 0 {
        return Err(Error::InvalidArgument("scale_dim must be at least 1".into()));
    }
    let scores = q.matmul_t(key)?.scale(1.0 / (scale_dim as f64).sqrt()).softmax_rows();
    let enriched = scores.matmul(v)?;
    Ok(AttentionOutput { scores, enriched })
}

fn require_cross(w: &AttentionWeights) -> Result<()> {
    if w.is_cross() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "cross-attention weights must not carry W_K or W_O".into(),
        ))
    }
}

/// Eager embedding cross-attention; `x_inf` is a `1×F` row.
pub fn embedding_cross_attention(
    x_ssl: &Matrix,
    x_inf: &Matrix,
    w: &AttentionWeights,
    scale: ScaleMode,
) -> Result<AttentionOutput> {
    require_cross(w)?;
    let mut tape = Tape::new();
    let (x, k, q, v) = (
        tape.leaf(x_ssl.clone()),
        tape.leaf(x_inf.clone()),
        tape.leaf(w.w_q.clone()),
        tape.leaf(w.w_v.clone()),
    );
    Ok(embedding_cross_attention_on(&mut tape, x, k, q, v, scale)?.output(&tape))
}

/// Eager temporal cross-attention; `x_inf` is a `1×F` row.
pub fn temporal_cross_attention(
    x_ssl: &Matrix,
    x_inf: &Matrix,
    w: &AttentionWeights,
    scale: ScaleMode,
) -> Result<AttentionOutput> {
    require_cross(w)?;
    let mut tape = Tape::new();
    let (x, k, q, v) = (
        tape.leaf(x_ssl.clone()),
        tape.leaf(x_inf.clone()),
        tape.leaf(w.w_q.clone()),
        tape.leaf(w.w_v.clone()),
    );
    Ok(temporal_cross_attention_on(&mut tape, x, k, q, v, scale)?.output(&tape))
}

/// Eager self-attention; `w` must carry `W_K` and `W_O`.
pub fn self_attention(x: &Matrix, w: &AttentionWeights) -> Result<AttentionOutput> {
    let (Some(w_k), Some(w_o)) = (&w.w_k, &w.w_o) else {
        return Err(Error::InvalidArgument(
            "self-attention needs W_K and W_O".into(),
        ));
    };
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let q = tape.leaf(w.w_q.clone());
    let k = tape.leaf(w_k.clone());
    let v = tape.leaf(w.w_v.clone());
    let o = tape.leaf(w_o.clone());
    Ok(self_attention_on(&mut tape, xv, q, k, v, o)?.output(&tape))
}
