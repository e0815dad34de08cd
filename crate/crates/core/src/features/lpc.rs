//! Linear prediction and formant picking.

use nalgebra::DMatrix;

/// Biased autocorrelation `r[0..=order]`.
pub fn autocorrelation(x: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|lag| x.iter().zip(x.iter().skip(lag)).map(|(a, b)| a * b).sum())
        .collect()
}

/// Levinson-Durbin recursion. Returns `a` with `a[0] = 1` such that
/// `x[n] + a[1] x[n-1] + ... + a[p] x[n-p]` is the prediction error, or
/// `None` when the signal has no energy or the recursion is unstable.
pub fn levinson(r: &[f64]) -> Option<Vec<f64>> {
    let p = r.len() - 1;
    if r[0] <= 0.0 {
        return None;
    }
    let mut a = vec![0.0; p + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=p {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 {
            return None;
        }
    }
    Some(a)
}

/// Roots of `z^p + a[1] z^(p-1) + ... + a[p]` from the companion matrix.
pub fn polynomial_roots(a: &[f64]) -> Vec<(f64, f64)> {
    let p = a.len() - 1;
    if p == 0 {
        return Vec::new();
    }
    let mut c = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        c[(0, j)] = -a[j + 1];
    }
    for i in 1..p {
        c[(i, i - 1)] = 1.0;
    }
    c.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

/// Resonances `(frequency_hz, bandwidth_hz)` of an all-pole model, sorted
/// by frequency, upper half-plane only.
pub fn resonances(a: &[f64], rate: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = polynomial_roots(a)
        .into_iter()
        .filter(|&(_, im)| im > 0.0)
        .map(|(re, im)| {
            let freq = im.atan2(re) * rate / (2.0 * std::f64::consts::PI);
            let bw = -(re.hypot(im)).ln() * rate / std::f64::consts::PI;
            (freq, bw)
        })
        .collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

#[derive(Clone, Copy, Debug)]
pub struct FormantLimits {
    pub f1: (f64, f64),
    pub f2: (f64, f64),
    pub max_bandwidth: f64,
}

/// F1 and F2 of one frame, or `None` if either is not found.
pub fn frame_formants(frame: &[f64], rate: f64, order: usize, limits: FormantLimits) -> Option<(f64, f64)> {
    if frame.len() <= order {
        return None;
    }
    let n = frame.len();
    let mut x: Vec<f64> = Vec::with_capacity(n);
    x.push(frame[0]);
    for i in 1..n {
        x.push(frame[i] - 0.97 * frame[i - 1]);
    }
    for (i, v) in x.iter_mut().enumerate() {
        let w = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
        *v *= w;
    }
    let a = levinson(&autocorrelation(&x, order))?;
    let candidates: Vec<(f64, f64)> = resonances(&a, rate)
        .into_iter()
        .filter(|&(f, bw)| f > 90.0 && bw < limits.max_bandwidth)
        .collect();
    let f1 = candidates
        .iter()
        .map(|c| c.0)
        .find(|&f| f >= limits.f1.0 && f <= limits.f1.1)?;
    let f2 = candidates
        .iter()
        .map(|c| c.0)
        .find(|&f| f > f1 && f >= limits.f2.0 && f <= limits.f2.1)?;
    Some((f1, f2))
}
