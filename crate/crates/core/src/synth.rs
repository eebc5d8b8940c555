//! Synthetic corpora with known structure, used to check what each model
//! variant can and cannot represent.
//!
//! * linear: `y = Φw + ε`, Φ standard normal, `‖w‖ = 1`, ε ~ N(0, σ²).
//! * interaction: `y = a·b + ε` with `a, b` uniform on [-1, 1] and further
//!   uniform distractor columns. No linear function of Φ explains `a·b`.
//! * lagged: binary Φ, `y_n = w·Φ_{n−1} + ε` (`y_0` uses Φ_{−1} = 0). The
//!   current row carries no information about the target.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{BasisDescriptor, FusionPolicy, SparseRow};
use crate::beat::Beat;
use crate::error::{Error, Result};
use crate::fusion::PieceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Linear,
    Interaction,
    Lagged,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<SynthKind> {
        match s {
            "linear" => Ok(SynthKind::Linear),
            "interaction" => Ok(SynthKind::Interaction),
            "lagged" => Ok(SynthKind::Lagged),
            _ => Err(Error::Config(format!("unknown synthetic corpus {s:?} (linear, interaction, lagged)"))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Linear => "linear",
            SynthKind::Interaction => "interaction",
            SynthKind::Lagged => "lagged",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub pieces: usize,
    pub rows: usize,
    pub inputs: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, seed: u64) -> SynthSpec {
        let inputs = match kind {
            SynthKind::Linear => 8,
            SynthKind::Interaction => 4,
            SynthKind::Lagged => 4,
        };
        SynthSpec { kind, pieces: 6, rows: 200, inputs, noise: 0.0, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPiece {
    pub id: String,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl SynthPiece {
    /// As a piece matrix with one row per integer beat.
    pub fn to_piece_matrix(&self) -> PieceMatrix {
        let columns = (0..self.x.ncols())
            .map(|j| BasisDescriptor { class: "synthetic".into(), label: format!("x{j}"), policy: FusionPolicy::Max })
            .collect();
        let rows: Vec<SparseRow> = (0..self.x.nrows())
            .map(|i| (0..self.x.ncols()).map(|j| (j, self.x[(i, j)])).filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let onsets = (0..self.x.nrows() as i64).map(Beat::from_integer).collect();
        PieceMatrix { piece_id: self.id.clone(), onsets, rows, columns }
    }
}

/// The true weights of a linear or lagged corpus.
pub fn true_weights(spec: &SynthSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    weights(&mut rng, spec)
}

fn weights(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Vec<f64> {
    let mut w: Vec<f64> = (0..spec.inputs).map(|_| StandardNormal.sample(rng)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if spec.kind == SynthKind::Lagged {
        // binary inputs have variance 1/4
        w.iter_mut().for_each(|v| *v *= 2.0 / norm);
    } else {
        w.iter_mut().for_each(|v| *v /= norm);
    }
    w
}

pub fn generate(spec: &SynthSpec) -> Result<Vec<SynthPiece>> {
    if spec.pieces == 0 || spec.rows < 2 {
        return Err(Error::Config("synthetic corpus needs at least one piece of two rows".into()));
    }
    if spec.inputs < 2 && spec.kind == SynthKind::Interaction {
        return Err(Error::Config("interaction corpus needs at least two inputs".into()));
    }
    if spec.inputs == 0 || !(spec.noise >= 0.0) {
        return Err(Error::Config("inputs must be positive and noise non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = weights(&mut rng, spec);
    let mut out = Vec::with_capacity(spec.pieces);
    for p in 0..spec.pieces {
        let (n, k) = (spec.rows, spec.inputs);
        let x = match spec.kind {
            SynthKind::Linear => DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng)),
            SynthKind::Interaction => DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0)),
            SynthKind::Lagged => DMatrix::from_fn(n, k, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }),
        };
        let mut y: Vec<f64> = (0..n)
            .map(|i| match spec.kind {
                SynthKind::Linear => (0..k).map(|j| x[(i, j)] * w[j]).sum(),
                SynthKind::Interaction => x[(i, 0)] * x[(i, 1)],
                SynthKind::Lagged if i == 0 => 0.0,
                SynthKind::Lagged => (0..k).map(|j| x[(i - 1, j)] * w[j]).sum(),
            })
            .collect();
        if spec.noise > 0.0 {
            for v in &mut y {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v += spec.noise * e;
            }
        }
        out.push(SynthPiece { id: format!("{}-{:02}", spec.kind, p + 1), x, y });
    }
    Ok(out)
}
