use orchdyn::targets::{k_weighting, r128_loudness, sample_targets, standardize, Alignment, LoudnessCurve};
use orchdyn::Beat;
use proptest::prelude::*;
use proptest::test_runner::{Config, FileFailurePersistence};

fn sine(freq: f64, amp: f64, rate: u32, seconds: f64) -> Vec<f64> {
    let n = (rate as f64 * seconds) as usize;
    (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin()).collect()
}

/// Welford's single-pass mean and population variance.
fn welford(xs: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    (mean, m2 / xs.len() as f64)
}

proptest! {
    #![proptest_config(Config { cases: 256, failure_persistence: Some(Box::new(FileFailurePersistence::Off)), ..Config::default() })]

    #[test]
    fn standardized_moments(raw in prop::collection::vec(-60.0f64..0.0, 2..200)) {
        prop_assume!(raw.iter().any(|&v| (v - raw[0]).abs() > 1e-6));
        let t = standardize(&raw).unwrap();
        let (m, v) = welford(&t.values);
        prop_assert!(m.abs() < 1e-9);
        prop_assert!((v - 1.0).abs() < 1e-9);
        let (rm, rv) = welford(&raw);
        prop_assert!((t.mean - rm).abs() <= 1e-12 * rm.abs().max(1.0));
        prop_assert!((t.std - rv.sqrt()).abs() <= 1e-9 * rv.sqrt());
        for (a, b) in t.destandardize(&t.values).iter().zip(&raw) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn increasing_inputs_give_non_decreasing_targets(
        steps in prop::collection::vec(0.1f64..2.0, 4..12),
        slope in 0.1f64..3.0,
        onsets in prop::collection::vec((0i64..20, 1i64..5), 1..20),
    ) {
        let last = steps.len() as i64;
        let mut t = 0.0;
        let mut points = vec![(Beat::ZERO, 0.0)];
        for (i, s) in steps.iter().enumerate() {
            t += s;
            points.push((Beat::from_integer(i as i64 + 1), t));
        }
        let align = Alignment::new(points).unwrap();
        let times: Vec<f64> = (0..=(t * 10.0).ceil() as usize + 1).map(|i| i as f64 / 10.0).collect();
        let values = times.iter().map(|&x| Some(slope * x - 30.0)).collect();
        let curve = LoudnessCurve::new(times, values).unwrap();
        let mut beats: Vec<Beat> = onsets
            .into_iter()
            .map(|(n, d)| Beat::new(n, d))
            .filter(|b| b.to_f64() + 0.1 <= last as f64)
            .collect();
        beats.sort();
        let y = sample_targets(&align, &curve, &beats, 0.1).unwrap();
        prop_assert!(y.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn silence_is_all_sentinel() {
    let c = r128_loudness(&[vec![0.0; 96_000], vec![0.0; 96_000]], 48_000).unwrap();
    assert!(!c.values.is_empty());
    assert!(c.values.iter().all(Option::is_none));
}

#[test]
fn full_scale_sine_in_one_channel_reads_minus_3_01() {
    for rate in [48_000, 44_100] {
        let s = sine(1000.0, 1.0, rate, 2.0);
        let stereo = r128_loudness(&[s.clone(), vec![0.0; s.len()]], rate).unwrap();
        let mono = r128_loudness(&[s.clone()], rate).unwrap();
        // analytic: mean square 1/2 times |H(1 kHz)|^2
        let (a, b) = k_weighting(rate);
        let g = a.magnitude(1000.0, rate as f64) * b.magnitude(1000.0, rate as f64);
        let analytic = -0.691 + 10.0 * (0.5 * g * g).log10();
        assert!((analytic + 3.01).abs() < 0.1);
        for v in stereo.values.iter().chain(&mono.values).skip(1) {
            let v = v.unwrap();
            assert!((v + 3.01).abs() < 0.1, "{v}");
            assert!((v - analytic).abs() < 0.01, "{v} vs {analytic}");
        }
        // the same sine in both channels adds 3.01 LU
        let both = r128_loudness(&[s.clone(), s], rate).unwrap();
        assert!((both.values[5].unwrap() - stereo.values[5].unwrap() - 10.0 * 2f64.log10()).abs() < 1e-9);
    }
}

#[test]
fn halving_amplitude_drops_6_02() {
    let loud = sine(440.0, 0.8, 48_000, 3.0);
    let quiet: Vec<f64> = loud.iter().map(|v| v * 0.5).collect();
    let a = r128_loudness(&[loud], 48_000).unwrap();
    let b = r128_loudness(&[quiet], 48_000).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x.unwrap() - y.unwrap() - 6.0206).abs() < 1e-4);
    }
}

#[test]
fn prepending_one_hop_shifts_by_one_sample() {
    let rate = 8_000;
    let signal: Vec<f64> = (0..rate * 3).map(|i| ((i * 7919) % 200) as f64 / 100.0 - 1.0).collect();
    let mut shifted = vec![0.0; rate / 10];
    shifted.extend(&signal);
    let a = r128_loudness(&[signal], rate as u32).unwrap();
    let b = r128_loudness(&[shifted], rate as u32).unwrap();
    assert_eq!(b.values.len(), a.values.len() + 1);
    assert_eq!(&b.values[1..], &a.values[..]);
    for (ta, tb) in a.times.iter().zip(&b.times[1..]) {
        assert!((tb - ta - 0.1).abs() < 1e-12);
    }
}
