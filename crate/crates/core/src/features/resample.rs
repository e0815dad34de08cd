//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc.

const ZERO_CROSSINGS: usize = 32;
const KAISER_BETA: f64 = 9.0;
const CUTOFF: f64 = 0.95;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Precomputed filter bank for one rate pair.
pub struct Resampler {
    up: usize,
    down: usize,
    half: isize,
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    pub fn new(from: u32, to: u32) -> Self {
        assert!(from > 0 && to > 0, "sample rates must be positive");
        let g = gcd(from as u64, to as u64);
        let up = (to as u64 / g) as usize;
        let down = (from as u64 / g) as usize;
        // Cutoff relative to the input Nyquist frequency.
        let fc = CUTOFF * (up as f64 / down as f64).min(1.0);
        let half = (ZERO_CROSSINGS as f64 / fc).ceil() as isize;
        let norm = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (-half + 1..=half)
                    .map(|k| {
                        // Distance from output instant to input sample `floor + k`.
                        let t = k as f64 - frac;
                        let r = t / half as f64;
                        let w = if r.abs() >= 1.0 {
                            0.0
                        } else {
                            bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
                        };
                        fc * sinc(fc * t) * w
                    })
                    .collect();
                let s: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|v| *v /= s);
                taps
            })
            .collect();
        Self { up, down, half, phases }
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let n_out = self.output_len(x.len());
        let n = x.len() as isize;
        (0..n_out)
            .map(|m| {
                let pos = m * self.down;
                let base = (pos / self.up) as isize;
                let taps = &self.phases[pos % self.up];
                let mut acc = 0.0;
                for (i, &h) in taps.iter().enumerate() {
                    let k = base - self.half + 1 + i as isize;
                    if (0..n).contains(&k) {
                        acc += h * x[k as usize];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Resamples `x` from `from` Hz to `to` Hz; equal rates return a copy.
pub fn resample(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to {
        return x.to_vec();
    }
    Resampler::new(from, to).process(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect()
    }

    #[test]
    fn lengths_follow_ratio() {
        assert_eq!(resample(&vec![0.0; 44_100], 44_100, 16_000).len(), 16_000);
        assert_eq!(resample(&vec![0.0; 8_000], 8_000, 16_000).len(), 16_000);
        assert_eq!(resample(&vec![0.0; 48_000], 48_000, 16_000).len(), 16_000);
    }

    #[test]
    fn identity_rate_copies() {
        let x = tone(440.0, 16_000, 100);
        assert_eq!(resample(&x, 16_000, 16_000), x);
    }

    #[test]
    fn in_band_tone_is_preserved() {
        for from in [22_050u32, 44_100, 48_000, 8_000] {
            let x = tone(500.0, from, from as usize);
            let y = resample(&x, from, 16_000);
            let expected = tone(500.0, 16_000, y.len());
            // Ignore filter edges.
            let err = y[800..y.len() - 800]
                .iter()
                .zip(&expected[800..expected.len() - 800])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-3, "{from}: {err}");
        }
    }

    #[test]
    fn out_of_band_tone_is_rejected() {
        let x = tone(12_000.0, 48_000, 48_000);
        let y = resample(&x, 48_000, 16_000);
        let rms = (y[800..y.len() - 800].iter().map(|v| v * v).sum::<f64>() / (y.len() - 1600) as f64).sqrt();
        assert!(rms < 1e-3, "{rms}");
    }

    #[test]
    fn dc_gain_is_unity() {
        let y = resample(&vec![0.25; 4_410], 44_100, 16_000);
        assert!(y[400..1200].iter().all(|v| (v - 0.25).abs() < 1e-12));
    }
}
