//! Closed-form (ridge) least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `argmin ‖Xw − y‖² + λ‖w‖²`.
///
/// λ > 0 solves the normal equations by Cholesky; λ = 0 returns the
/// minimum-norm least-squares solution via SVD, so rank-deficient designs
/// are fine.
pub fn fit_linear(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("ridge penalty {lambda} must be a finite non-negative number")));
    }
    if x.nrows() != y.len() {
        return Err(Error::Contract(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("design or targets contain non-finite values".into()));
    }
    let yv = DVector::from_column_slice(y);
    let w = if lambda > 0.0 {
        let mut a = x.transpose() * x;
        for i in 0..a.nrows() {
            a[(i, i)] += lambda;
        }
        let rhs = x.transpose() * &yv;
        match a.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => return Err(Error::Numerical(format!("normal equations not positive definite; {}", condition_report(x)))),
        }
    } else {
        if x.ncols() == 0 || x.nrows() == 0 {
            return Ok(vec![0.0; x.ncols()]);
        }
        let svd = x.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = f64::EPSILON * x.nrows().max(x.ncols()) as f64 * smax;
        svd.solve(&yv, eps).map_err(|e| Error::Numerical(format!("{e}; {}", condition_report(x))))?
    };
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite weights; {}", condition_report(x))));
    }
    Ok(w.as_slice().to_vec())
}

/// Human-readable conditioning summary: singular value range, empty and
/// duplicated columns.
pub fn condition_report(x: &DMatrix<f64>) -> String {
    let k = x.ncols();
    let zero: Vec<usize> = (0..k).filter(|&j| x.column(j).iter().all(|&v| v == 0.0)).collect();
    let mut dup = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            if dup.len() < 5 && !zero.contains(&a) && x.column(a) == x.column(b) {
                dup.push((a, b));
            }
        }
    }
    let sv = if x.nrows() > 0 && k > 0 && x.iter().all(|v| v.is_finite()) {
        let s = x.clone().singular_values();
        let (lo, hi) = (s.min(), s.max());
        format!("singular values in [{lo:.3e}, {hi:.3e}], condition {:.3e}", if lo > 0.0 { hi / lo } else { f64::INFINITY })
    } else {
        "singular values unavailable".to_string()
    };
    format!("{sv}; {} all-zero column(s) {:?}; duplicated columns {:?}", zero.len(), zero, dup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_design() {
        let y = vec![1.0, -2.0, 0.5];
        let w = fit_linear(&DMatrix::identity(3, 3), &y, 0.0).unwrap();
        for (a, b) in w.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(50, 8, |_, _| rng.gen_range(-1.0..1.0));
        let w_true: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = (&x * DVector::from_column_slice(&w_true)).as_slice().to_vec();
        let w = fit_linear(&x, &y, 0.0).unwrap();
        for (a, b) in w.iter().zip(&w_true) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicate_columns_share_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base = DMatrix::from_fn(30, 2, |_, _| rng.gen_range(-1.0..1.0));
        let x = DMatrix::from_fn(30, 3, |i, j| base[(i, j.min(1))]);
        let y: Vec<f64> = (0..30).map(|i| 2.0 * base[(i, 0)] + 3.0 * base[(i, 1)]).collect();
        let w = fit_linear(&x, &y, 0.1).unwrap();
        assert!((w[1] - w[2]).abs() < 1e-9, "{w:?}");
        assert!(w[1] > 1.0);
        // without a penalty the minimum-norm solution splits it too
        let w0 = fit_linear(&x, &y, 0.0).unwrap();
        assert!((w0[1] - 1.5).abs() < 1e-9 && (w0[2] - 1.5).abs() < 1e-9, "{w0:?}");
    }

    #[test]
    fn bad_inputs() {
        let x = DMatrix::identity(2, 2);
        assert!(matches!(fit_linear(&x, &[1.0, 2.0], -1.0), Err(Error::Config(_))));
        assert!(matches!(fit_linear(&x, &[1.0], 0.0), Err(Error::Contract(_))));
        assert!(matches!(fit_linear(&x, &[1.0, f64::NAN], 0.0), Err(Error::Numerical(_))));
        let report = condition_report(&DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]));
        assert!(report.contains("[2]") && report.contains("(0, 1)"), "{report}");
    }
}
