//! Forward passes and analytic gradients of `½ Σ (ŷ − y)² / N`.

use nalgebra::{DMatrix, DVector};

use super::{ModelParams, Sequence, Variant};
use crate::error::{Error, Result};

pub(crate) struct Forward {
    pub yhat: Vec<f64>,
    /// Hidden activations, N × H (empty for the linear model).
    pub h: DMatrix<f64>,
}

pub(crate) fn forward(p: &ModelParams, x: &DMatrix<f64>) -> Forward {
    let l = p.layout();
    let n = x.nrows();
    match p.variant {
        Variant::Linear => {
            let w = DVector::from_column_slice(&p.weights);
            Forward { yhat: (x * w).as_slice().to_vec(), h: DMatrix::zeros(0, 0) }
        }
        Variant::Feedforward | Variant::Recurrent => {
            let hdim = p.hidden;
            let b = &p.weights[l.b..l.v];
            let v = &p.weights[l.v..l.c];
            let c = p.weights[l.c];
            // pre-activations from the inputs, N × H
            let mut z = x * p.u().transpose();
            let mut h = DMatrix::zeros(n, hdim);
            let rec = (p.variant == Variant::Recurrent).then(|| p.recurrent_matrix());
            let mut prev = vec![0.0; hdim];
            for i in 0..n {
                for j in 0..hdim {
                    let mut s = z[(i, j)] + b[j];
                    if let Some(w) = &rec {
                        for k in 0..hdim {
                            s += w[(j, k)] * prev[k];
                        }
                    }
                    z[(i, j)] = s;
                    h[(i, j)] = s.tanh();
                }
                if rec.is_some() {
                    for j in 0..hdim {
                        prev[j] = h[(i, j)];
                    }
                }
            }
            let yhat = (0..n).map(|i| (0..hdim).map(|j| h[(i, j)] * v[j]).sum::<f64>() + c).collect();
            Forward { yhat, h }
        }
    }
}

/// Mean of `½ (ŷ − y)²` over all rows of all sequences.
pub fn loss(p: &ModelParams, data: &[Sequence]) -> Result<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for seq in data {
        let yhat = p.predict(&seq.x)?;
        s += yhat.iter().zip(&seq.y).map(|(a, b)| 0.5 * (a - b).powi(2)).sum::<f64>();
        n += seq.y.len();
    }
    Ok(s / n.max(1) as f64)
}

/// Loss and its gradient with respect to the flat weight vector. Recurrent
/// sequences are back-propagated through their whole length; the hidden
/// state starts at zero in every sequence.
pub fn gradients(p: &ModelParams, data: &[Sequence]) -> Result<(f64, Vec<f64>)> {
    let l = p.layout();
    let total: usize = data.iter().map(|s| s.y.len()).sum();
    if total == 0 {
        return Err(Error::Contract("no rows to fit".into()));
    }
    let inv_n = 1.0 / total as f64;
    let mut g = vec![0.0; l.len];
    let mut loss = 0.0;
    let hdim = p.hidden;

    for (si, seq) in data.iter().enumerate() {
        if seq.x.ncols() != p.inputs || seq.x.nrows() != seq.y.len() {
            return Err(Error::Contract(format!("sequence {si} has shape {}x{}", seq.x.nrows(), seq.x.ncols())));
        }
        let fw = forward(p, &seq.x);
        let n = seq.y.len();
        let e: Vec<f64> = fw.yhat.iter().zip(&seq.y).map(|(a, b)| (a - b) * inv_n).collect();
        for (r, (a, b)) in fw.yhat.iter().zip(&seq.y).enumerate() {
            let d = a - b;
            if !d.is_finite() {
                return Err(Error::Numerical(format!("non-finite prediction in sequence {si}, row {r}")));
            }
            loss += 0.5 * d * d * inv_n;
        }

        match p.variant {
            Variant::Linear => {
                let gw = seq.x.transpose() * DVector::from_column_slice(&e);
                for (k, v) in gw.iter().enumerate() {
                    g[k] += v;
                }
            }
            Variant::Feedforward | Variant::Recurrent => {
                let v = &p.weights[l.v..l.c];
                let rec = (p.variant == Variant::Recurrent).then(|| p.recurrent_matrix());
                // dz: gradient at the pre-activations, N × H
                let mut dz = DMatrix::zeros(n, hdim);
                let mut carry = vec![0.0; hdim];
                for i in (0..n).rev() {
                    for j in 0..hdim {
                        let h = fw.h[(i, j)];
                        g[l.v + j] += e[i] * h;
                        let dh = e[i] * v[j] + carry[j];
                        dz[(i, j)] = dh * (1.0 - h * h);
                    }
                    g[l.c] += e[i];
                    if let Some(w) = &rec {
                        for k in 0..hdim {
                            carry[k] = (0..hdim).map(|j| w[(j, k)] * dz[(i, j)]).sum();
                        }
                        if i > 0 {
                            for j in 0..hdim {
                                for k in 0..hdim {
                                    g[l.w + j * hdim + k] += dz[(i, j)] * fw.h[(i - 1, k)];
                                }
                            }
                        }
                    }
                    for j in 0..hdim {
                        g[l.b + j] += dz[(i, j)];
                    }
                }
                let gu = dz.transpose() * &seq.x;
                for j in 0..hdim {
                    for k in 0..p.inputs {
                        g[l.u + j * p.inputs + k] += gu[(j, k)];
                    }
                }
            }
        }
    }
    if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite loss or gradient".into()));
    }
    Ok((loss, g))
}
