//! Momentary loudness after EBU R128 / ITU-R BS.1770: K-weighting, 400 ms
//! mean-square windows every 100 ms, channel sum, `-0.691 + 10 log10`.

use super::LoudnessCurve;
use crate::error::{Error, Result};

/// Direct-form biquad with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }

    /// |H(e^{jω})| at `freq` Hz.
    pub fn magnitude(&self, freq: f64, rate: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / rate;
        let z = |c: [f64; 3]| {
            let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
            let im = -c[1] * w.sin() - c[2] * (2.0 * w).sin();
            (re * re + im * im).sqrt()
        };
        z(self.b) / z([1.0, self.a[0], self.a[1]])
    }
}

/// Published 48 kHz pre-filter (stage 1, high shelf) and RLB high-pass
/// (stage 2).
pub const SHELF_48K: Biquad = Biquad {
    b: [1.53512485958697, -2.69169618940638, 1.19839281085285],
    a: [-1.69065929318241, 0.73248077421585],
};
pub const HIGHPASS_48K: Biquad = Biquad { b: [1.0, -2.0, 1.0], a: [-1.99004745483398, 0.99007225036621] };

/// K-weighting stages for a sample rate. 48 kHz uses the published
/// coefficients; other rates re-derive them from the analog prototypes.
pub fn k_weighting(rate: u32) -> (Biquad, Biquad) {
    if rate == 48_000 {
        (SHELF_48K, HIGHPASS_48K)
    } else {
        k_weighting_derived(rate)
    }
}

/// Bilinear-transform K-weighting at any rate.
pub fn k_weighting_derived(rate: u32) -> (Biquad, Biquad) {
    let fs = rate as f64;

    let gain_db = 3.999843853973347;
    let q = 0.7071752369554196;
    let fc = 1681.974450955533;
    let k = (std::f64::consts::PI * fc / fs).tan();
    let vh = 10f64.powf(gain_db / 20.0);
    let vb = vh.powf(0.4996667741545416);
    let a0 = 1.0 + k / q + k * k;
    let shelf = Biquad {
        b: [(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0],
        a: [2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0],
    };

    let q = 0.5003270373253953;
    let fc = 38.13547087613982;
    let k = (std::f64::consts::PI * fc / fs).tan();
    let a0 = 1.0 + k / q + k * k;
    let highpass = Biquad { b: [1.0, -2.0, 1.0], a: [2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0] };
    (shelf, highpass)
}

pub const WINDOW_SECONDS: f64 = 0.4;
pub const HOP_SECONDS: f64 = 0.1;

/// Momentary loudness of planar channel data in [-1, 1]. Windows with zero
/// power are reported as `None`.
pub fn r128_loudness(channels: &[Vec<f64>], rate: u32) -> Result<LoudnessCurve> {
    if channels.is_empty() || channels.len() > 2 {
        return Err(Error::Format(format!("{} channels; only mono and stereo are supported", channels.len())));
    }
    if rate < 8_000 {
        return Err(Error::Format(format!("sample rate {rate} Hz is below 8 kHz")));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::Format("channels differ in length".into()));
    }
    let win = (WINDOW_SECONDS * rate as f64).round() as usize;
    let hop = (HOP_SECONDS * rate as f64).round() as usize;
    let (shelf, highpass) = k_weighting(rate);

    // prefix sums of squared K-weighted samples, summed over channels
    let mut prefix = vec![0.0f64; len + 1];
    for ch in channels {
        let weighted = highpass.filter(&shelf.filter(ch));
        let mut acc = 0.0;
        for (i, v) in weighted.iter().enumerate() {
            acc += v * v;
            prefix[i + 1] += acc;
        }
    }
    let count = if len >= win { (len - win) / hop + 1 } else { 0 };
    let mut times = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let s = i * hop;
        let power = (prefix[s + win] - prefix[s]) / win as f64;
        times.push((s as f64 + win as f64 / 2.0) / rate as f64);
        values.push(if power > 0.0 { Some(-0.691 + 10.0 * power.log10()) } else { None });
    }
    LoudnessCurve::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, rate: u32, seconds: f64) -> Vec<f64> {
        let n = (rate as f64 * seconds) as usize;
        (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin()).collect()
    }

    #[test]
    fn derived_coefficients_match_published_ones() {
        let (shelf, hp) = k_weighting_derived(48_000);
        for i in 0..3 {
            assert!((shelf.b[i] - SHELF_48K.b[i]).abs() < 1e-8, "{:?}", shelf);
            assert_eq!(hp.b[i], HIGHPASS_48K.b[i]);
        }
        for i in 0..2 {
            assert!((shelf.a[i] - SHELF_48K.a[i]).abs() < 1e-8, "{:?}", shelf);
            assert!((hp.a[i] - HIGHPASS_48K.a[i]).abs() < 1e-8, "{:?}", hp);
        }
    }

    #[test]
    fn ten_seconds_give_97_windows() {
        let c = r128_loudness(&[vec![0.0; 480_000]], 48_000).unwrap();
        assert_eq!(c.values.len(), 97);
        assert!(c.values.iter().all(|v| v.is_none()));
        assert!((c.times[0] - 0.2).abs() < 1e-12);
        assert!((c.times[96] - 9.8).abs() < 1e-12);
    }

    #[test]
    fn mono_sine_matches_analytic_gain() {
        for rate in [44_100, 48_000] {
            let c = r128_loudness(&[sine(1000.0, 1.0, rate, 3.0)], rate).unwrap();
            let (s, h) = k_weighting(rate);
            let g = s.magnitude(1000.0, rate as f64) * h.magnitude(1000.0, rate as f64);
            let expected = -0.691 + 10.0 * (0.5 * g * g).log10();
            for v in &c.values[2..] {
                assert!((v.unwrap() - expected).abs() < 0.01, "{rate}: {v:?} vs {expected}");
            }
            assert!((expected + 3.01).abs() < 0.05);
        }
    }

    #[test]
    fn short_input_has_no_windows() {
        let c = r128_loudness(&[vec![0.5; 100]], 8_000).unwrap();
        assert!(c.values.is_empty());
    }

    #[test]
    fn layout_errors() {
        assert!(matches!(r128_loudness(&[], 48_000), Err(Error::Format(_))));
        assert!(matches!(r128_loudness(&[vec![], vec![], vec![]], 48_000), Err(Error::Format(_))));
        assert!(matches!(r128_loudness(&[vec![0.0; 10]], 4_000), Err(Error::Format(_))));
        assert!(matches!(r128_loudness(&[vec![0.0; 10], vec![0.0; 9]], 48_000), Err(Error::Format(_))));
    }
}
