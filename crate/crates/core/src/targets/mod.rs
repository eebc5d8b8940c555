//! Expressive targets: loudness sampled just after each score onset through
//! a score-to-performance alignment, standardized per piece.

mod r128;
mod wav;

use crate::beat::Beat;
use crate::error::{Error, Result};

pub use r128::{k_weighting, k_weighting_derived, r128_loudness, Biquad, HOP_SECONDS, WINDOW_SECONDS};
pub use wav::{read_wav, read_wav_file, Audio};

/// Default sampling offset after an onset, in beats.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Offset below the quietest measured value used in place of gated windows.
pub const SENTINEL_OFFSET: f64 = 10.0;

/// Monotone map from score beats to performance seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    beats: Vec<Beat>,
    seconds: Vec<f64>,
}

impl Alignment {
    pub fn new(points: Vec<(Beat, f64)>) -> Result<Alignment> {
        if points.len() < 2 {
            return Err(Error::Format("an alignment needs at least two points".into()));
        }
        for w in points.windows(2) {
            if !(w[0].0 < w[1].0 && w[0].1 < w[1].1) {
                return Err(Error::Format(format!(
                    "alignment is not strictly increasing between ({}, {}) and ({}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::Format("alignment has non-finite times".into()));
        }
        let (beats, seconds) = points.into_iter().unzip();
        Ok(Alignment { beats, seconds })
    }

    /// Constant tempo: `seconds_per_beat` from beat 0 to `last_beat`.
    pub fn constant(seconds_per_beat: f64, last_beat: i64) -> Result<Alignment> {
        Alignment::new((0..=last_beat).map(|b| (Beat::from_integer(b), b as f64 * seconds_per_beat)).collect())
    }

    pub fn first_beat(&self) -> f64 {
        self.beats[0].to_f64()
    }

    pub fn last_beat(&self) -> f64 {
        self.beats[self.beats.len() - 1].to_f64()
    }

    /// Performance time of `onset + delta` by linear interpolation.
    pub fn time_at(&self, onset: Beat, delta: f64) -> Result<f64> {
        let x = onset.to_f64() + delta;
        let (first, last) = (self.first_beat(), self.last_beat());
        if !(x >= first && x <= last) {
            return Err(Error::Coverage { onset, delta, first, last });
        }
        let k = self.beats.partition_point(|b| b.to_f64() <= x).clamp(1, self.beats.len() - 1);
        let (x0, x1) = (self.beats[k - 1].to_f64(), self.beats[k].to_f64());
        let (t0, t1) = (self.seconds[k - 1], self.seconds[k]);
        Ok(t0 + (x - x0) * (t1 - t0) / (x1 - x0))
    }

    /// `beat_num,beat_den,seconds` lines; a header line is optional.
    pub fn from_csv(text: &str) -> Result<Alignment> {
        let mut points = Vec::new();
        for (i, fields) in csv_rows(text, 3)? {
            let bad = |what: &str| Error::Format(format!("alignment line {i}: bad {what}"));
            let num: i64 = fields[0].parse().map_err(|_| bad("beat numerator"))?;
            let den: i64 = fields[1].parse().map_err(|_| bad("beat denominator"))?;
            if den <= 0 {
                return Err(bad("beat denominator"));
            }
            let secs: f64 = fields[2].parse().map_err(|_| bad("seconds"))?;
            points.push((Beat::new(num, den), secs));
        }
        Alignment::new(points)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("beat_num,beat_den,seconds\n");
        for (b, s) in self.beats.iter().zip(&self.seconds) {
            out.push_str(&format!("{},{},{s:?}\n", b.numer(), b.denom()));
        }
        out
    }
}

/// Non-empty, comment-free CSV rows with a fixed field count. A first row
/// that does not start with a digit or sign is taken as a header.
fn csv_rows(text: &str, width: usize) -> Result<Vec<(usize, Vec<&str>)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if rows.is_empty() && !line.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width {
            return Err(Error::Format(format!("line {}: expected {width} fields, found {}", i + 1, fields.len())));
        }
        rows.push((i + 1, fields));
    }
    Ok(rows)
}

/// Loudness in LUFS at a fixed hop; `None` marks windows without signal.
#[derive(Debug, Clone, PartialEq)]
pub struct LoudnessCurve {
    pub times: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl LoudnessCurve {
    pub fn new(times: Vec<f64>, values: Vec<Option<f64>>) -> Result<LoudnessCurve> {
        if times.len() != values.len() {
            return Err(Error::Format("loudness times and values differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format("loudness times are not strictly increasing".into()));
        }
        if times.len() > 2 {
            let hop = times[1] - times[0];
            if times.windows(2).any(|w| ((w[1] - w[0]) - hop).abs() > 1e-6 * hop.max(1.0)) {
                return Err(Error::Format("loudness samples are not evenly spaced".into()));
            }
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Format("loudness values must be finite or the sentinel".into()));
        }
        Ok(LoudnessCurve { times, values })
    }

    pub fn hop(&self) -> Option<f64> {
        (self.times.len() > 1).then(|| self.times[1] - self.times[0])
    }

    /// `seconds,lufs` with `-inf` for the sentinel.
    pub fn from_csv(text: &str) -> Result<LoudnessCurve> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, f) in csv_rows(text, 2)? {
            let t: f64 = f[0].parse().map_err(|_| Error::Format(format!("loudness line {i}: bad seconds")))?;
            let v = match f[1] {
                "-inf" | "-Inf" | "-INF" => None,
                s => Some(s.parse::<f64>().map_err(|_| Error::Format(format!("loudness line {i}: bad value")))?),
            };
            times.push(t);
            values.push(v);
        }
        LoudnessCurve::new(times, values)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seconds,lufs\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            match v {
                Some(v) => out.push_str(&format!("{t:.3},{v:.6}\n")),
                None => out.push_str(&format!("{t:.3},-inf\n")),
            }
        }
        out
    }

    /// Values with the sentinel replaced by the quietest finite value minus
    /// [`SENTINEL_OFFSET`].
    pub fn filled(&self) -> Result<Vec<f64>> {
        let floor = self
            .values
            .iter()
            .flatten()
            .copied()
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
            .ok_or_else(|| Error::DegenerateTarget("loudness curve has no measurable window".into()))?;
        Ok(self.values.iter().map(|v| v.unwrap_or(floor - SENTINEL_OFFSET)).collect())
    }
}

/// Linear interpolation in `(xs, ys)`, clamped at both ends.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let k = xs.partition_point(|&v| v <= x);
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    y0 + (x - x0) * (y1 - y0) / (x1 - x0)
}

/// Raw loudness at `onset + delta` beats for every onset.
pub fn sample_targets(align: &Alignment, curve: &LoudnessCurve, onsets: &[Beat], delta: f64) -> Result<Vec<f64>> {
    if !(delta >= 0.0) {
        return Err(Error::Config(format!("sampling offset {delta} must be non-negative")));
    }
    if curve.times.is_empty() {
        return Err(Error::DegenerateTarget("empty loudness curve".into()));
    }
    let filled = curve.filled()?;
    onsets
        .iter()
        .map(|&onset| Ok(interpolate(&curve.times, &filled, align.time_at(onset, delta)?)))
        .collect()
}

/// Standardized targets with the statistics needed to undo it.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl TargetVector {
    pub fn destandardize(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.std + self.mean).collect()
    }
}

/// Zero mean, unit population variance.
pub fn standardize(raw: &[f64]) -> Result<TargetVector> {
    if raw.len() < 2 {
        return Err(Error::DegenerateTarget(format!("{} target value(s); need at least 2", raw.len())));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateTarget("non-finite target value".into()));
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::DegenerateTarget("targets are constant".into()));
    }
    Ok(TargetVector { values: raw.iter().map(|v| (v - mean) / std).collect(), mean, std })
}
