//! Integrated loudness after ITU-R BS.1770 (mono).
//!
//! K-weighting is a high-shelf followed by a high-pass biquad; the
//! coefficients are derived for any sample rate from the analog
//! prototype parameters, matching the published 48 kHz values.

/// Shelf and high-pass biquads as `(b, a)` pairs with `a[0] = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KWeighting {
    pub shelf_b: [f64; 3],
    pub shelf_a: [f64; 3],
    pub highpass_b: [f64; 3],
    pub highpass_a: [f64; 3],
}

pub const ABSOLUTE_GATE_LUFS: f64 = -70.0;
pub const RELATIVE_GATE_LU: f64 = -10.0;
pub const BLOCK_S: f64 = 0.4;
pub const STEP_S: f64 = 0.1;

impl KWeighting {
    pub fn for_rate(rate: u32) -> Self {
        let fs = rate as f64;

        let f0 = 1681.974450955533;
        let gain_db = 3.999843853973347;
        let q = 0.7071752369554196;
        let k = (std::f64::consts::PI * f0 / fs).tan();
        let vh = 10f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.4996667741545416);
        let a0 = 1.0 + k / q + k * k;
        let shelf_b = [
            (vh + vb * k / q + k * k) / a0,
            2.0 * (k * k - vh) / a0,
            (vh - vb * k / q + k * k) / a0,
        ];
        let shelf_a = [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0];

        // The published high-pass has an unnormalised numerator, so its
        // passband gain is that of the 48 kHz design at every rate.
        let f0 = 38.13547087602444;
        let q = 0.5003270373238773;
        let k48 = (std::f64::consts::PI * f0 / 48_000.0).tan();
        let k = (std::f64::consts::PI * f0 / fs).tan();
        let a0 = 1.0 + k / q + k * k;
        let g = (1.0 + k48 / q + k48 * k48) / a0;
        let highpass_b = [g, -2.0 * g, g];
        let highpass_a = [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0];

        Self {
            shelf_b,
            shelf_a,
            highpass_b,
            highpass_a,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        biquad(&biquad(x, self.shelf_b, self.shelf_a), self.highpass_b, self.highpass_a)
    }
}

/// Direct form I biquad with zero initial state.
fn biquad(x: &[f64], b: [f64; 3], a: [f64; 3]) -> Vec<f64> {
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    x.iter()
        .map(|&x0| {
            let y0 = b[0] * x0 + b[1] * x1 + b[2] * x2 - a[1] * y1 - a[2] * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            y0
        })
        .collect()
}

fn block_loudness(z: f64) -> f64 {
    -0.691 + 10.0 * z.log10()
}

/// Mean-square power of each 400 ms block on a 100 ms grid. A signal
/// shorter than one block is measured as a single block.
pub fn block_powers(weighted: &[f64], rate: u32) -> Vec<f64> {
    let len = (BLOCK_S * rate as f64).round() as usize;
    let step = (STEP_S * rate as f64).round() as usize;
    if weighted.is_empty() {
        return Vec::new();
    }
    if weighted.len() < len {
        return vec![weighted.iter().map(|v| v * v).sum::<f64>() / weighted.len() as f64];
    }
    let mut powers = Vec::new();
    let mut start = 0;
    while start + len <= weighted.len() {
        let z = weighted[start..start + len].iter().map(|v| v * v).sum::<f64>() / len as f64;
        powers.push(z);
        start += step;
    }
    powers
}

/// Two-stage gated loudness of a list of block powers; `None` when no
/// block survives the absolute gate.
pub fn gated_loudness(powers: &[f64]) -> Option<f64> {
    let loud: Vec<f64> = powers
        .iter()
        .copied()
        .filter(|&z| z > 0.0 && block_loudness(z) > ABSOLUTE_GATE_LUFS)
        .collect();
    if loud.is_empty() {
        return None;
    }
    let relative = block_loudness(loud.iter().sum::<f64>() / loud.len() as f64) + RELATIVE_GATE_LU;
    let kept: Vec<f64> = loud.into_iter().filter(|&z| block_loudness(z) > relative).collect();
    if kept.is_empty() {
        return None;
    }
    Some(block_loudness(kept.iter().sum::<f64>() / kept.len() as f64))
}

/// Integrated loudness in LUFS, or `None` for silence.
pub fn integrated_loudness(samples: &[f64], rate: u32) -> Option<f64> {
    let weighted = KWeighting::for_rate(rate).apply(samples);
    gated_loudness(&block_powers(&weighted, rate))
}
