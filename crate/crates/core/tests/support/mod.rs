//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::PathBuf;

use parkattn::attention::{embedding_cross_attention_on, self_attention_on, temporal_cross_attention_on, ScaleMode};
use parkattn::data::{make_cross_lingual_splits, Label, SplitPlan, Task, UtteranceRecord};
use parkattn::model::{ModelParams, Sample, Variant};
use parkattn::tensor::{Axis, Matrix, Tape, Var};
use parkattn::training::{f1_score, F1Average};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub const FD_STEP: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

fn norm(m: &Matrix) -> f64 {
    m.data().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`, or the absolute difference when both vanish.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let diff = norm(&a.sub(b).expect("same shape"));
    let scale = norm(a) + norm(b);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Five-point central differences of `f` around `x`. The wide stencil
/// keeps round-off small next to gradients of order 1e-7.
pub fn numeric_grad(x: &Matrix, h: f64, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let v = x.data()[i];
        let mut at = |dx: f64| {
            xp.data_mut()[i] = v + dx;
            f(&xp)
        };
        let d = 8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h));
        xp.data_mut()[i] = v;
        g.data_mut()[i] = d / (12.0 * h);
    }
    g
}

/// Largest relative error between tape gradients and central differences
/// of `Σ w ⊙ build(inputs)` for every input.
pub fn check_op(rng: &mut impl Rng, inputs: &[Matrix], build: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let eval = |xs: &[Matrix]| -> (Tape, Vec<Var>, Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = build(&mut tape, &vars);
        (tape, vars, out)
    };
    let (tape, vars, out) = eval(inputs);
    let (r, c) = tape.value(out).shape();
    let w = random_matrix(rng, r, c, 1.0);
    let grads = tape.backward_with(out, w.clone()).expect("backward");
    let mut worst: f64 = 0.0;
    for (k, x) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k], x);
        let numeric = numeric_grad(x, FD_STEP, |xk| {
            let mut xs = inputs.to_vec();
            xs[k] = xk.clone();
            let (t, _, o) = eval(&xs);
            t.value(o).data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
        });
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

pub const GRADIENT_TOL: f64 = 1e-4;
pub const GRADIENT_TRIALS: u64 = 100;

fn dims(r: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (r.gen_range(1..=5), r.gen_range(1..=5), r.gen_range(1..=5))
}

fn attention_inputs(r: &mut ChaCha8Rng, n_weights: usize) -> (Vec<Matrix>, ScaleMode) {
    let (t, d, f) = dims(r);
    let mut x = vec![random_matrix(r, t, d, 1.5), random_matrix(r, 1, f, 1.5)];
    x.extend((0..n_weights).map(|_| random_matrix(r, d, d, 1.0)));
    let scale = if r.gen() { ScaleMode::Contracted } else { ScaleMode::KeyDim };
    (x, scale)
}

/// One randomised trial of a gradient check, returning its relative error.
pub type GradientTrial = fn(&mut ChaCha8Rng) -> f64;

/// Every differentiable tape op and attention block.
pub fn op_cases() -> Vec<(&'static str, GradientTrial)> {
    vec![
        ("matmul", |r| {
            let (a, b, c) = dims(r);
            let x = [random_matrix(r, a, b, 2.0), random_matrix(r, b, c, 2.0)];
            check_op(r, &x, |t, v| t.matmul(v[0], v[1]).unwrap())
        }),
        ("transpose/scale/add", |r| {
            let (a, b, _) = dims(r);
            let s = r.gen_range(-3.0..3.0);
            let x = [random_matrix(r, a, b, 2.0), random_matrix(r, b, a, 2.0)];
            check_op(r, &x, |t, v| {
                let xt = t.transpose(v[0]);
                let y = t.scalar_scale(xt, s);
                t.add(y, v[1]).unwrap()
            })
        }),
        ("softmax_rows", |r| {
            let (a, b, _) = dims(r);
            let x = [random_matrix(r, a, b, 4.0)];
            check_op(r, &x, |t, v| t.softmax_rows(v[0]))
        }),
        ("layer_norm", |r| {
            let (a, b, _) = dims(r);
            let x = [random_matrix(r, a, b, 2.0), random_matrix(r, 1, b, 2.0), random_matrix(r, 1, b, 2.0)];
            check_op(r, &x, |t, v| t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap())
        }),
        ("swish", |r| {
            let (a, b, _) = dims(r);
            let x = [random_matrix(r, a, b, 6.0)];
            check_op(r, &x, |t, v| t.swish(v[0]))
        }),
        ("mean", |r| {
            let (a, b, _) = dims(r);
            let x = [random_matrix(r, a, b, 2.0)];
            let axis = if r.gen() { Axis::Rows } else { Axis::Cols };
            check_op(r, &x, |t, v| t.mean_axis(v[0], axis).unwrap())
        }),
        ("cross_entropy", |r| {
            let k = r.gen_range(2..=5);
            let label = r.gen_range(0..k);
            let x = [random_matrix(r, 1, k, 5.0)];
            check_op(r, &x, |t, v| t.cross_entropy(v[0], label).unwrap())
        }),
        ("repeat/concat/add_bias", |r| {
            let (a, b, c) = dims(r);
            let x = [random_matrix(r, 1, b, 2.0), random_matrix(r, 1, c, 2.0), random_matrix(r, 1, b + c, 2.0)];
            check_op(r, &x, |t, v| {
                let z = t.concat_vectors(&[v[0], v[1]]).unwrap();
                let rep = t.repeat_rows(z, a).unwrap();
                t.add_bias(rep, v[2]).unwrap()
            })
        }),
        ("embedding cross-attention", |r| {
            let (x, scale) = attention_inputs(r, 2);
            check_op(r, &x, |t, v| embedding_cross_attention_on(t, v[0], v[1], v[2], v[3], scale).unwrap().enriched)
        }),
        ("temporal cross-attention", |r| {
            let (x, scale) = attention_inputs(r, 2);
            check_op(r, &x, |t, v| temporal_cross_attention_on(t, v[0], v[1], v[2], v[3], scale).unwrap().enriched)
        }),
        ("self-attention", |r| {
            let (mut x, _) = attention_inputs(r, 4);
            x.remove(1);
            check_op(r, &x, |t, v| self_attention_on(t, v[0], v[1], v[2], v[3], v[4]).unwrap().enriched)
        }),
    ]
}

/// Each model variant end to end, loss to parameters.
pub fn architecture_cases() -> Vec<(&'static str, GradientTrial)> {
    vec![
        ("cross_attn", |r| {
            let (p, ssl, inf, label) = random_model(r, Variant::CrossAttn);
            check_architecture(&p, &ssl, &inf, label)
        }),
        ("self_ssl", |r| {
            let (p, ssl, inf, label) = random_model(r, Variant::SelfSsl);
            check_architecture(&p, &ssl, &inf, label)
        }),
        ("self_inf", |r| {
            let (p, ssl, inf, label) = random_model(r, Variant::SelfInf);
            check_architecture(&p, &ssl, &inf, label)
        }),
    ]
}

/// Worst relative error of a case over the trial seeds.
pub fn sweep(trial: GradientTrial) -> f64 {
    (0..GRADIENT_TRIALS).map(|seed| trial(&mut rng(seed))).fold(0.0, f64::max)
}

/// Random small sample and labelled model of `variant`.
pub fn random_model(rng: &mut impl Rng, variant: Variant) -> (ModelParams, Matrix, Matrix, usize) {
    let t = rng.gen_range(1..=5);
    let d = rng.gen_range(1..=5);
    let f = rng.gen_range(1..=5);
    let mut p = ModelParams::init(variant, d, f, rng.gen()).expect("init");
    // Move the head away from its initial values so every term matters.
    for m in p.tensors_mut() {
        for v in m.data_mut() {
            *v += rng.gen_range(-0.5..0.5);
        }
    }
    let ssl = random_matrix(rng, t, d, 1.5);
    let inf = random_matrix(rng, 1, f, 1.5);
    (p, ssl, inf, rng.gen_range(0..2))
}

/// Largest relative error over all parameter gradients of the loss.
pub fn check_architecture(p: &ModelParams, ssl: &Matrix, inf: &Matrix, label: usize) -> f64 {
    let sample = Sample { ssl, inf };
    let (_, grads, _) = p.loss_and_grads(sample, label).expect("grads");
    let mut worst: f64 = 0.0;
    for (k, g) in grads.iter().enumerate() {
        let x = p.tensors()[k].clone();
        let numeric = numeric_grad(&x, FD_STEP, |xk| {
            let mut q = p.clone();
            *q.tensors_mut()[k] = xk.clone();
            q.loss(sample, label).expect("loss")
        });
        worst = worst.max(rel_err(g, &numeric));
    }
    worst
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn project(x: &Matrix, w: &Matrix) -> Vec<Vec<f64>> {
    (0..x.rows())
        .map(|t| (0..w.cols()).map(|j| (0..x.cols()).map(|i| x.get(t, i) * w.get(i, j)).sum()).collect())
        .collect()
}

/// Forward pass of `cross_attn` written out index by index.
pub struct LoopForward {
    pub s_emb: Vec<Vec<f64>>,
    pub s_temp: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
    pub logits: [f64; 2],
}

pub fn loop_forward_cross_attn(p: &ModelParams, ssl: &Matrix, inf: &[f64]) -> LoopForward {
    let (t, d, f) = (ssl.rows(), ssl.cols(), inf.len());
    let temporal = p.temporal.as_ref().expect("cross_attn");

    let q = project(ssl, &p.attention.w_q);
    let v = project(ssl, &p.attention.w_v);
    let s_emb: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let logits: Vec<f64> = (0..f)
                .map(|j| (0..t).map(|k| q[k][i] * inf[j]).sum::<f64>() / (t as f64).sqrt())
                .collect();
            softmax(&logits)
        })
        .collect();
    let mut emb_pooled = vec![0.0; f];
    for k in 0..t {
        for j in 0..f {
            let z: f64 = (0..d).map(|i| v[k][i] * s_emb[i][j]).sum();
            emb_pooled[j] += z / t as f64;
        }
    }

    let q = project(ssl, &temporal.w_q);
    let v = project(ssl, &temporal.w_v);
    let s_temp: Vec<Vec<f64>> = (0..t)
        .map(|k| {
            let logits: Vec<f64> = (0..f)
                .map(|j| (0..d).map(|i| q[k][i] * inf[j]).sum::<f64>() / (d as f64).sqrt())
                .collect();
            softmax(&logits)
        })
        .collect();
    let mut temp_pooled = vec![0.0; f];
    for i in 0..d {
        for j in 0..f {
            let z: f64 = (0..t).map(|k| v[k][i] * s_temp[k][j]).sum();
            temp_pooled[j] += z / d as f64;
        }
    }

    let pooled: Vec<f64> = emb_pooled.into_iter().chain(temp_pooled).collect();
    let n = pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / n;
    let var = pooled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let h: Vec<f64> = pooled
        .iter()
        .enumerate()
        .map(|(c, x)| {
            let y = p.head.ln_gain.get(0, c) * (x - mean) / (var + 1e-5).sqrt() + p.head.ln_bias.get(0, c);
            y / (1.0 + (-y).exp())
        })
        .collect();
    let mut logits = [0.0; 2];
    for (o, l) in logits.iter_mut().enumerate() {
        *l = p.head.b_cls.get(0, o) + h.iter().enumerate().map(|(c, x)| x * p.head.w_cls.get(c, o)).sum::<f64>();
    }
    LoopForward {
        s_emb,
        s_temp,
        pooled,
        logits,
    }
}

/// Minimum path cost over every monotone warping path, by enumeration.
pub fn exhaustive_dtw(seq: &Matrix, reference: &Matrix) -> f64 {
    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }
    fn walk(seq: &Matrix, reference: &Matrix, i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + dist(seq.row(i), reference.row(j));
        let (n, m) = (seq.rows(), reference.rows());
        if i + 1 == n && j + 1 == m {
            *best = best.min(acc);
            return;
        }
        if i + 1 < n {
            walk(seq, reference, i + 1, j, acc, best);
        }
        if j + 1 < m {
            walk(seq, reference, i, j + 1, acc, best);
        }
        if i + 1 < n && j + 1 < m {
            walk(seq, reference, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(seq, reference, 0, 0, 0.0, &mut best);
    best
}

/// K-weighting magnitude at `freq` for sample rate `fs`: the analog shelf
/// and high-pass prototypes evaluated on the bilinear-warped axis.
pub fn k_weight_response(freq: f64, fs: f64) -> Complex<f64> {
    let warp = |f: f64| (PI * f / fs).tan();
    let j = Complex::new(0.0, 1.0);

    let (f0, q) = (1681.974450955533, 0.7071752369554196);
    let vh = 10f64.powf(3.999843853973347 / 20.0);
    let vb = vh.powf(0.4996667741545416);
    let p = j * (warp(freq) / warp(f0));
    let shelf = (p * p * vh + p * (vb / q) + 1.0) / (p * p + p / q + 1.0);

    let (f0, q) = (38.13547087602444, 0.5003270373238773);
    let p = j * (warp(freq) / warp(f0));
    // Passband gain of the published 48 kHz stage.
    let k48 = (PI * f0 / 48_000.0).tan();
    let highpass = p * p * (1.0 + k48 / q + k48 * k48) / (p * p + p / q + 1.0);
    shelf * highpass
}

/// Magnitude of a digital biquad cascade at `freq`.
pub fn biquad_response(stages: &[([f64; 3], [f64; 3])], freq: f64, fs: f64) -> f64 {
    let z1 = Complex::from_polar(1.0, -2.0 * PI * freq / fs);
    stages
        .iter()
        .map(|(b, a)| {
            let num = b[0] + z1 * b[1] + z1 * z1 * b[2];
            let den = a[0] + z1 * a[1] + z1 * z1 * a[2];
            (num / den).norm()
        })
        .product()
}

/// Integrated loudness with K-weighting applied in the frequency domain.
pub fn oracle_loudness(x: &[f64], rate: u32) -> Option<f64> {
    let fs = rate as f64;
    let n = (x.len() + rate as usize).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let freq = bin * fs / n as f64;
        let h = if bin >= 0.0 {
            k_weight_response(freq, fs)
        } else {
            k_weight_response(-freq, fs).conj()
        };
        *c *= h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let y: Vec<f64> = buf[..x.len()].iter().map(|c| c.re / n as f64).collect();

    let block = (0.4 * fs).round() as usize;
    let step = (0.1 * fs).round() as usize;
    let mean_square = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
    let powers: Vec<f64> = if y.len() < block {
        vec![mean_square(&y)]
    } else {
        (0..=(y.len() - block) / step).map(|b| mean_square(&y[b * step..b * step + block])).collect()
    };
    let lufs = |z: f64| -0.691 + 10.0 * z.log10();
    let above: Vec<f64> = powers.into_iter().filter(|&z| z > 0.0 && lufs(z) > -70.0).collect();
    if above.is_empty() {
        return None;
    }
    let gate = lufs(above.iter().sum::<f64>() / above.len() as f64) - 10.0;
    let kept: Vec<f64> = above.into_iter().filter(|&z| lufs(z) > gate).collect();
    if kept.is_empty() {
        return None;
    }
    Some(lufs(kept.iter().sum::<f64>() / kept.len() as f64))
}

pub fn sine(freq: f64, amp: f64, rate: u32, secs: f64) -> Vec<f64> {
    (0..(secs * rate as f64).round() as usize)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin())
        .collect()
}

/// Sustained vowel: harmonics of `f0` up to 4 kHz shaped by resonances at
/// 700 and 1220 Hz, peak-normalised to 0.5.
pub fn vowel(f0: f64, rate: u32, secs: f64) -> Vec<f64> {
    let resonance = |f: f64, fc: f64, bw: f64| 1.0 / (((f * f - fc * fc) / (bw * f)).powi(2) + 1.0).sqrt();
    let harmonics: Vec<(f64, f64)> = (1..)
        .map(|k| k as f64 * f0)
        .take_while(|&f| f < 4000.0)
        .map(|f| (f, (resonance(f, 700.0, 90.0) + resonance(f, 1220.0, 110.0) + 0.05) * f0 / f))
        .collect();
    let x: Vec<f64> = (0..(secs * rate as f64) as usize)
        .map(|i| {
            let t = i as f64 / rate as f64;
            harmonics.iter().map(|(f, a)| a * (2.0 * PI * f * t).sin()).sum()
        })
        .collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.into_iter().map(|v| 0.5 * v / peak).collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Best single-feature threshold rule on the training rows, scored by
/// macro F1 on the test rows.
pub fn stump_f1(rows: &[(Vec<f64>, usize)], train: &[usize], test: &[usize]) -> f64 {
    let f = rows[0].0.len();
    let mut best = (0usize, 0.0f64, false, 0usize);
    for j in 0..f {
        let mut values: Vec<f64> = train.iter().map(|&i| rows[i].0[j]).collect();
        values.sort_by(f64::total_cmp);
        for w in values.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            for flip in [false, true] {
                let correct = train
                    .iter()
                    .filter(|&&i| usize::from((rows[i].0[j] > thr) != flip) == rows[i].1)
                    .count();
                if correct > best.3 {
                    best = (j, thr, flip, correct);
                }
            }
        }
    }
    let (j, thr, flip, _) = best;
    let pairs: Vec<(usize, usize)> = test
        .iter()
        .map(|&i| (usize::from((rows[i].0[j] > thr) != flip), rows[i].1))
        .collect();
    f1_score(&pairs, F1Average::Macro)
}

/// Random manifest with at least `min_per_label` speakers of each label,
/// one to four utterances per speaker and one to four datasets.
pub fn random_manifest(rng: &mut impl Rng, min_per_label: usize) -> Vec<UtteranceRecord> {
    let n_hc = rng.gen_range(min_per_label..=min_per_label + 25);
    let n_pd = rng.gen_range(min_per_label..=min_per_label + 25);
    let n_datasets = rng.gen_range(1..=4);
    let mut records = Vec::new();
    for s in 0..n_hc + n_pd {
        let label = if s < n_hc { Label::Hc } else { Label::Pd };
        let speaker = format!("s{s}x{:x}", rng.gen::<u16>());
        let dataset = format!("d{}", rng.gen_range(0..n_datasets));
        for u in 0..rng.gen_range(1..=4) {
            let id = format!("{speaker}_{u}");
            records.push(UtteranceRecord {
                utterance_id: id.clone(),
                speaker_id: speaker.clone(),
                dataset_id: dataset.clone(),
                task: Task::Vowels,
                label,
                ssl_path: PathBuf::from(format!("{id}.ssl")),
                inf_path: PathBuf::from(format!("{id}.inf")),
                alignment_path: None,
            });
        }
    }
    records
}

/// Checks speaker disjointness, coverage and label balance of a nested plan.
pub fn check_nested_plan(records: &[UtteranceRecord], plan: &SplitPlan) -> Result<(), String> {
    let labels: BTreeMap<&str, Label> = records.iter().map(|r| (r.speaker_id.as_str(), r.label)).collect();
    let all: BTreeSet<String> = labels.keys().map(|s| s.to_string()).collect();
    let mut tested = BTreeSet::new();
    let balanced = |sets: Vec<&BTreeSet<String>>, what: &str| -> Result<(), String> {
        for label in [Label::Hc, Label::Pd] {
            let counts: Vec<usize> = sets
                .iter()
                .map(|s| s.iter().filter(|x| labels[x.as_str()] == label).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            if hi - lo > 1 {
                return Err(format!("{what}: {label} speakers per fold {counts:?}"));
            }
        }
        Ok(())
    };
    for (k, fold) in plan.folds.iter().enumerate() {
        if !fold.train.is_disjoint(&fold.test) {
            return Err(format!("outer fold {k}: a speaker is in train and test"));
        }
        let union: BTreeSet<String> = fold.train.union(&fold.test).cloned().collect();
        if union != all {
            return Err(format!("outer fold {k} does not cover every speaker"));
        }
        for s in &fold.test {
            if !tested.insert(s.clone()) {
                return Err(format!("speaker {s} is tested twice"));
            }
        }
        let mut validated = BTreeSet::new();
        for inner in &fold.inner {
            if !inner.train.is_disjoint(&inner.validation) {
                return Err(format!("outer fold {k}: inner train and validation overlap"));
            }
            let u: BTreeSet<String> = inner.train.union(&inner.validation).cloned().collect();
            if u != fold.train {
                return Err(format!("outer fold {k}: inner split leaves the outer train set"));
            }
            validated.extend(inner.validation.iter().cloned());
        }
        if validated != fold.train {
            return Err(format!("outer fold {k}: inner validation does not cover the outer train set"));
        }
        balanced(fold.inner.iter().map(|i| &i.validation).collect(), &format!("inner folds of {k}"))?;
    }
    if tested != all {
        return Err("some speaker is never tested".into());
    }
    balanced(plan.folds.iter().map(|f| &f.test).collect(), "outer folds")
}

/// Checks that holding out each dataset in turn tests every record once.
pub fn check_cross_lingual(records: &[UtteranceRecord]) -> Result<(), String> {
    let datasets: BTreeSet<&str> = records.iter().map(|r| r.dataset_id.as_str()).collect();
    if datasets.len() < 2 {
        return match make_cross_lingual_splits(records, datasets.iter().next().unwrap()) {
            Err(_) => Ok(()),
            Ok(_) => Err("a single dataset was accepted".into()),
        };
    }
    let mut count: BTreeMap<String, usize> = BTreeMap::new();
    for d in &datasets {
        let (train, test) = make_cross_lingual_splits(records, d).map_err(|e| e.to_string())?;
        if train.len() + test.len() != records.len() {
            return Err(format!("holding out {d} loses records"));
        }
        if test.iter().any(|r| r.dataset_id != *d) || train.iter().any(|r| r.dataset_id == *d) {
            return Err(format!("holding out {d} mixes datasets"));
        }
        for r in &test {
            *count.entry(r.utterance_id.clone()).or_default() += 1;
        }
    }
    if count.len() != records.len() || count.values().any(|&c| c != 1) {
        return Err("records are not tested exactly once".into());
    }
    Ok(())
}

pub const PUBLISHED_48K: [([f64; 3], [f64; 3]); 2] = [
    (
        [1.53512485958697, -2.69169618940638, 1.19839281085285],
        [1.0, -1.69065929318241, 0.73248077421585],
    ),
    ([1.0, -2.0, 1.0], [1.0, -1.99004745483398, 0.99007225036621]),
];

/// Signals spanning rates, levels and gating conditions.
pub fn loudness_signals() -> Vec<(&'static str, Vec<f64>, u32)> {
    let mut r = rng(14);
    let noise: Vec<f64> = (0..44_100).map(|_| r.gen_range(-0.3..0.3)).collect();
    let mut gapped = vowel(150.0, 16_000, 1.0);
    gapped.extend(std::iter::repeat_n(0.0, 8000));
    gapped.extend(vowel(120.0, 16_000, 1.0).iter().map(|v| 0.3 * v));
    gapped.extend((0..8000).map(|_| r.gen_range(-1e-4..1e-4)));
    let bursts: Vec<f64> = sine(2000.0, 0.2, 32_000, 3.0)
        .into_iter()
        .enumerate()
        .map(|(i, v)| if (i / 9600) % 2 == 0 { v } else { 0.0 })
        .collect();
    vec![
        ("1 kHz at -20 dBFS, 16 kHz", sine(1000.0, 0.1, 16_000, 3.0), 16_000),
        ("440 Hz at -6 dBFS, 44.1 kHz", sine(440.0, 0.5, 44_100, 2.0), 44_100),
        ("100 Hz at -30 dBFS, 48 kHz", sine(100.0, 0.0316, 48_000, 2.0), 48_000),
        ("white noise, 22.05 kHz", noise, 22_050),
        ("vowels with gaps, 16 kHz", gapped, 16_000),
        ("2 kHz bursts, 32 kHz", bursts, 32_000),
        ("short 250 Hz tone, 8 kHz", sine(250.0, 0.4, 8000, 0.25), 8000),
    ]
}
