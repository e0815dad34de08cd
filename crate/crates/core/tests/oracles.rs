//! Library routines against independently written references.

mod support;

use parkattn::attention::{scaled_dot_attention, temporal_cross_attention, embedding_cross_attention, ScaleMode};
use parkattn::features::{condition_audio, integrated_loudness, KWeighting};
use parkattn::interpret::dtw_align;
use parkattn::model::{ModelParams, Sample, Variant};
use parkattn::tensor::Matrix;
use rand::Rng;
use support::*;

#[test]
fn cross_attn_forward_matches_index_loops() {
    let mut r = rng(11);
    for _ in 0..200 {
        let (t, d, f) = (r.gen_range(1..=7), r.gen_range(1..=6), r.gen_range(1..=8));
        let p = ModelParams::init(Variant::CrossAttn, d, f, r.gen()).unwrap();
        let ssl = random_matrix(&mut r, t, d, 2.0);
        let inf: Vec<f64> = (0..f).map(|_| r.gen_range(-2.0..2.0)).collect();
        let row = Matrix::row_vector(inf.clone());
        let got = p.forward(Sample { ssl: &ssl, inf: &row }).unwrap();
        let want = loop_forward_cross_attn(&p, &ssl, &inf);
        assert!(got.primary_scores.max_abs_diff(&Matrix::from_rows(&want.s_emb)) < 1e-12);
        assert!(got.temporal_scores.unwrap().max_abs_diff(&Matrix::from_rows(&want.s_temp)) < 1e-12);
        for k in 0..2 {
            assert!((got.logits[k] - want.logits[k]).abs() < 1e-10, "{:?} {:?}", got.logits, want.logits);
        }
        assert_eq!(want.pooled.len(), 2 * f);
    }
}

#[test]
fn cross_attention_equals_generic_attention_with_repeated_key() {
    let mut r = rng(12);
    for _ in 0..200 {
        let (t, d, f) = (r.gen_range(1..=6), r.gen_range(1..=6), r.gen_range(1..=6));
        let x = random_matrix(&mut r, t, d, 1.5);
        let inf = random_matrix(&mut r, 1, f, 1.5);
        let w = parkattn::attention::AttentionWeights::cross(random_matrix(&mut r, d, d, 1.0), random_matrix(&mut r, d, d, 1.0));
        let q = x.matmul(&w.w_q).unwrap();
        let v = x.matmul(&w.w_v).unwrap();

        // Embedding branch: queries are the D columns of Q, keys the F
        // columns of repeat(x_inf, T), values the F columns' mixing of V.
        let emb = embedding_cross_attention(&x, &inf, &w, ScaleMode::Contracted).unwrap();
        let key = inf.repeat_rows(t).unwrap().transpose();
        let generic = scaled_dot_attention(&q.transpose(), &key, &Matrix::identity(f), t).unwrap();
        assert!(emb.scores.max_abs_diff(&generic.scores) < 1e-13);
        assert!(emb.enriched.max_abs_diff(&v.matmul(&generic.scores).unwrap()) < 1e-12);

        let temp = temporal_cross_attention(&x, &inf, &w, ScaleMode::Contracted).unwrap();
        let key = inf.repeat_rows(d).unwrap().transpose();
        let generic = scaled_dot_attention(&q, &key, &Matrix::identity(f), d).unwrap();
        assert!(temp.scores.max_abs_diff(&generic.scores) < 1e-13);
        assert!(temp.enriched.max_abs_diff(&v.transpose().matmul(&generic.scores).unwrap()) < 1e-12);
    }
}

#[test]
fn dtw_matches_enumeration_on_every_size_up_to_six() {
    let mut r = rng(13);
    for n in 1..=6 {
        for m in 1..=6 {
            for _ in 0..20 {
                let c = r.gen_range(1..=3);
                let a = random_matrix(&mut r, n, c, 2.0);
                let b = random_matrix(&mut r, m, c, 2.0);
                let dp = dtw_align(&a, &b).unwrap();
                let brute = exhaustive_dtw(&a, &b);
                assert!((dp.cost - brute).abs() < 1e-12, "{n}x{m}: {} vs {brute}", dp.cost);
                let path_cost: f64 = dp
                    .path
                    .iter()
                    .map(|&(i, j)| a.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
                    .sum();
                assert!((path_cost - dp.cost).abs() < 1e-12);
                assert_eq!(dtw_align(&a, &a).unwrap().cost, 0.0);
            }
        }
    }
}

#[test]
fn oracle_filter_matches_published_coefficients() {
    for freq in [20.0, 50.0, 100.0, 500.0, 997.0, 1500.0, 3000.0, 8000.0, 15000.0] {
        let oracle = 20.0 * k_weight_response(freq, 48_000.0).norm().log10();
        let table = 20.0 * biquad_response(&PUBLISHED_48K, freq, 48_000.0).log10();
        assert!((oracle - table).abs() < 1e-3, "{freq} Hz: {oracle} vs {table}");
    }
    let k = KWeighting::for_rate(48_000);
    let ours = [(k.shelf_b, k.shelf_a), (k.highpass_b, k.highpass_a)];
    for freq in [30.0, 1000.0, 10000.0] {
        let a = biquad_response(&ours, freq, 48_000.0);
        let b = biquad_response(&PUBLISHED_48K, freq, 48_000.0);
        assert!((20.0 * (a / b).log10()).abs() < 1e-4);
    }
}

#[test]
fn oracle_meter_reference_tone() {
    // A full-scale 997 Hz sine reads −3.01 LKFS.
    let x = sine(997.0, 1.0, 48_000, 5.0);
    let l = oracle_loudness(&x, 48_000).unwrap();
    assert!((l + 3.01).abs() < 0.01, "{l}");
    assert_eq!(oracle_loudness(&vec![0.0; 48_000], 48_000), None);
}

#[test]
fn conditioned_audio_reads_minus_23_on_the_oracle_meter() {
    for (name, x, rate) in loudness_signals() {
        let c = condition_audio(&x, rate).unwrap();
        assert_eq!(c.rate, 16_000);
        let oracle = oracle_loudness(&c.samples, c.rate).unwrap();
        let ours = integrated_loudness(&c.samples, c.rate).unwrap();
        assert!((oracle + 23.0).abs() <= 0.1, "{name}: oracle {oracle}");
        assert!((oracle - ours).abs() < 0.05, "{name}: oracle {oracle}, library {ours}");
    }
}
