//! Predictors `f(Φ, w)`: linear, one-hidden-layer tanh network, and an
//! Elman-style recurrent network over the onset sequence of a piece.

mod grad;
mod linear;
mod train;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grad::{gradients, loss};
pub use linear::{condition_report, fit_linear};
pub use train::{train, Optimizer, TrainConfig, TrainOutcome, TrainTrace};

pub const DEFAULT_HIDDEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Recurrent,
    Feedforward,
    Linear,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Recurrent, Variant::Feedforward, Variant::Linear];

    /// Short name used on the command line and in reports.
    pub fn short(self) -> &'static str {
        match self {
            Variant::Linear => "lin",
            Variant::Feedforward => "ff",
            Variant::Recurrent => "rnn",
        }
    }

    /// Column heading in result tables.
    pub fn heading(self) -> &'static str {
        match self {
            Variant::Linear => "Lin",
            Variant::Feedforward => "FF",
            Variant::Recurrent => "RN",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "lin" | "linear" => Ok(Variant::Linear),
            "ff" | "feedforward" => Ok(Variant::Feedforward),
            "rnn" | "recurrent" => Ok(Variant::Recurrent),
            _ => Err(Error::Config(format!("unknown model variant {s:?} (lin, ff, rnn)"))),
        }
    }
}

/// One piece: its rows in onset order and its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl Sequence {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Sequence> {
        if x.nrows() != y.len() {
            return Err(Error::Contract(format!("{} rows but {} targets", x.nrows(), y.len())));
        }
        Ok(Sequence { x, y })
    }
}

/// All weights in one flat vector.
///
/// Layout: linear `w[K]`; feed-forward `U[H×K] b[H] v[H] c`; recurrent
/// `U[H×K] W[H×H] b[H] v[H] c`. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub variant: Variant,
    pub inputs: usize,
    pub hidden: usize,
    pub weights: Vec<f64>,
    pub seed: u64,
}

/// Offsets of the parameter blocks inside the flat vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub u: usize,
    pub w: usize,
    pub b: usize,
    pub v: usize,
    pub c: usize,
    pub len: usize,
}

impl ModelParams {
    pub(crate) fn layout(&self) -> Layout {
        layout(self.variant, self.inputs, self.hidden)
    }

    pub fn zeros(variant: Variant, inputs: usize, hidden: usize) -> ModelParams {
        let len = layout(variant, inputs, hidden).len;
        ModelParams { variant, inputs, hidden, weights: vec![0.0; len], seed: 0 }
    }

    /// Uniform in ±1/√fan-in for weight matrices, zero biases.
    pub fn init(variant: Variant, inputs: usize, hidden: usize, seed: u64) -> ModelParams {
        let mut p = ModelParams::zeros(variant, inputs, hidden);
        p.seed = seed;
        let l = p.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, w: &mut Vec<f64>| {
            let r = 1.0 / (fan_in.max(1) as f64).sqrt();
            for x in &mut w[range] {
                *x = rng.gen_range(-r..r);
            }
        };
        match variant {
            Variant::Linear => fill(0..inputs, inputs, &mut p.weights),
            Variant::Feedforward | Variant::Recurrent => {
                fill(l.u..l.w, inputs, &mut p.weights);
                fill(l.w..l.b, hidden, &mut p.weights);
                fill(l.v..l.c, hidden, &mut p.weights);
            }
        }
        p
    }

    pub fn u(&self) -> DMatrix<f64> {
        let l = self.layout();
        DMatrix::from_row_slice(self.hidden, self.inputs, &self.weights[l.u..l.w])
    }

    pub fn recurrent_matrix(&self) -> DMatrix<f64> {
        let l = self.layout();
        DMatrix::from_row_slice(self.hidden, self.hidden, &self.weights[l.w..l.b])
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    /// Predictions for one piece, rows in onset order.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.inputs {
            return Err(Error::Contract(format!(
                "matrix has {} columns, model expects {}",
                x.ncols(),
                self.inputs
            )));
        }
        Ok(grad::forward(self, x).yhat)
    }

    /// Versioned JSON document with named row-major arrays.
    pub fn to_json(&self, config: &TrainConfig, fingerprint: &str) -> Result<String> {
        let l = self.layout();
        let mut arrays = BTreeMap::new();
        let mut add = |name: &str, shape: Vec<usize>, range: std::ops::Range<usize>| {
            arrays.insert(name.to_string(), NamedArray { shape, data: self.weights[range].to_vec() });
        };
        match self.variant {
            Variant::Linear => add("w", vec![self.inputs], 0..l.len),
            _ => {
                add("U", vec![self.hidden, self.inputs], l.u..l.w);
                if self.variant == Variant::Recurrent {
                    add("W", vec![self.hidden, self.hidden], l.w..l.b);
                }
                add("b", vec![self.hidden], l.b..l.v);
                add("v", vec![self.hidden], l.v..l.c);
                add("c", vec![], l.c..l.len);
            }
        }
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            variant: self.variant,
            inputs: self.inputs,
            hidden: self.hidden,
            seed: self.seed,
            dataset_fingerprint: fingerprint.to_string(),
            config: config.clone(),
            arrays,
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    /// Parse a model file, refusing one fitted on a different feature space.
    pub fn from_json(text: &str, expected_fingerprint: Option<&str>) -> Result<(ModelParams, TrainConfig)> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!("model format version {} is not supported", file.format_version)));
        }
        if let Some(fp) = expected_fingerprint {
            if fp != file.dataset_fingerprint {
                return Err(Error::Contract("model was fitted on a different descriptor index".into()));
            }
        }
        let mut p = ModelParams::zeros(file.variant, file.inputs, file.hidden);
        p.seed = file.seed;
        let l = p.layout();
        let blocks: Vec<(&str, std::ops::Range<usize>)> = match file.variant {
            Variant::Linear => vec![("w", 0..l.len)],
            Variant::Feedforward => vec![("U", l.u..l.w), ("b", l.b..l.v), ("v", l.v..l.c), ("c", l.c..l.len)],
            Variant::Recurrent => {
                vec![("U", l.u..l.w), ("W", l.w..l.b), ("b", l.b..l.v), ("v", l.v..l.c), ("c", l.c..l.len)]
            }
        };
        for (name, range) in blocks {
            let a = file.arrays.get(name).ok_or_else(|| Error::Format(format!("model file lacks array {name}")))?;
            if a.data.len() != range.len() || a.shape.iter().product::<usize>().max(1) != range.len() {
                return Err(Error::Format(format!("array {name} has the wrong shape")));
            }
            p.weights[range].copy_from_slice(&a.data);
        }
        if !p.all_finite() {
            return Err(Error::Format("model file holds non-finite weights".into()));
        }
        Ok((p, file.config))
    }
}

pub(crate) fn layout(variant: Variant, inputs: usize, hidden: usize) -> Layout {
    match variant {
        Variant::Linear => Layout { u: 0, w: 0, b: 0, v: 0, c: 0, len: inputs },
        Variant::Feedforward | Variant::Recurrent => {
            let u = 0;
            let w = hidden * inputs;
            let b = w + if variant == Variant::Recurrent { hidden * hidden } else { 0 };
            let v = b + hidden;
            let c = v + hidden;
            Layout { u, w, b, v, c, len: c + 1 }
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct NamedArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    variant: Variant,
    inputs: usize,
    hidden: usize,
    seed: u64,
    dataset_fingerprint: String,
    config: TrainConfig,
    arrays: BTreeMap<String, NamedArray>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_predict_output_bias() {
        let x = DMatrix::from_fn(5, 3, |i, j| (i + j) as f64);
        for v in Variant::ALL {
            let mut p = ModelParams::zeros(v, 3, 4);
            assert!(p.predict(&x).unwrap().iter().all(|&y| y == 0.0));
            if v != Variant::Linear {
                let c = p.layout().c;
                p.weights[c] = 0.25;
                assert!(p.predict(&x).unwrap().iter().all(|&y| y == 0.25));
            }
        }
    }

    #[test]
    fn linear_identity_design_returns_weights() {
        let mut p = ModelParams::zeros(Variant::Linear, 4, 0);
        p.weights = vec![0.5, -1.0, 2.0, 3.5];
        assert_eq!(p.predict(&DMatrix::identity(4, 4)).unwrap(), p.weights);
    }

    #[test]
    fn recurrence_unrolls_by_hand() {
        let mut p = ModelParams::zeros(Variant::Recurrent, 1, 1);
        let l = p.layout();
        p.weights[l.u] = 1.0;
        p.weights[l.w] = 1.0;
        p.weights[l.v] = 1.0;
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let y = p.predict(&x).unwrap();
        let h1 = 1f64.tanh();
        let h2 = h1.tanh();
        let h3 = h2.tanh();
        for (a, b) in y.iter().zip([h1, h2, h3]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let p = ModelParams::zeros(Variant::Feedforward, 3, 2);
        assert!(matches!(p.predict(&DMatrix::zeros(2, 4)), Err(Error::Contract(_))));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ModelParams::init(Variant::Recurrent, 16, 5, 7);
        let b = ModelParams::init(Variant::Recurrent, 16, 5, 7);
        let c = ModelParams::init(Variant::Recurrent, 16, 5, 8);
        assert_eq!(a, b);
        assert_ne!(a.weights, c.weights);
        let l = a.layout();
        assert!(a.weights[l.u..l.w].iter().all(|w| w.abs() < 0.25));
        assert!(a.weights[l.b..l.v].iter().all(|&w| w == 0.0));
        assert_eq!(a.weights[l.c], 0.0);
    }

    #[test]
    fn json_round_trip_and_fingerprint_check() {
        let cfg = TrainConfig::default();
        for v in Variant::ALL {
            let p = ModelParams::init(v, 6, 3, 11);
            let text = p.to_json(&cfg, "abc").unwrap();
            let (back, back_cfg) = ModelParams::from_json(&text, Some("abc")).unwrap();
            assert_eq!(back, p);
            assert_eq!(back_cfg, cfg);
            assert!(matches!(ModelParams::from_json(&text, Some("xyz")), Err(Error::Contract(_))));
        }
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.short().parse::<Variant>().unwrap(), v);
        }
        assert!("gru".parse::<Variant>().is_err());
    }
}
