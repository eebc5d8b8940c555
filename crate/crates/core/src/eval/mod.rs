//! Metrics, leave-one-out splits and the experiment harness.

mod experiment;
mod report;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use experiment::{run_experiment, CorpusPiece, ExperimentConfig, ExperimentReport, FoldReport, FoldStatus, PieceCurve};
pub use report::{curve_svg, format_table};

fn check_lengths(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::Contract(format!("{} targets but {} predictions", y.len(), yhat.len())));
    }
    if y.len() < 2 {
        return Err(Error::Contract("metrics need at least two values".into()));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean squared residual.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

/// `1 − SS_res / SS_tot`; unbounded below.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    let m = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateTarget("R² is undefined for constant targets".into()));
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Pearson correlation, clamped to [-1, 1] against rounding.
pub fn pearson(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    let (my, mp) = (mean(y), mean(yhat));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        let (da, db) = (a - my, b - mp);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Piece indices of one leave-one-out fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    pub test: usize,
    pub validation: Vec<usize>,
    pub train: Vec<usize>,
}

/// Hold out `test`, draw `n_validation` validation pieces from the rest with
/// a generator seeded by `seed + test`, train on the remainder.
pub fn loo_split(n_pieces: usize, test: usize, n_validation: usize, seed: u64) -> Result<FoldSpec> {
    if n_pieces < n_validation + 2 {
        return Err(Error::Config(format!(
            "{n_pieces} pieces cannot provide 1 test, {n_validation} validation and 1 training piece"
        )));
    }
    if test >= n_pieces {
        return Err(Error::Config(format!("test piece {test} out of range")));
    }
    let rest: Vec<usize> = (0..n_pieces).filter(|&i| i != test).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(test as u64));
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, rest.len(), n_validation).into_vec();
    picks.sort_unstable();
    let validation: Vec<usize> = picks.iter().map(|&i| rest[i]).collect();
    let train = rest.into_iter().filter(|i| !validation.contains(i)).collect();
    Ok(FoldSpec { test, validation, train })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let y = [1.0, -0.5, 2.0, 0.0];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert!((pearson(&y, &y).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mean_prediction_has_zero_r2() {
        let y = [1.0, 2.0, 4.0, 9.0];
        let m = [4.0; 4];
        assert_eq!(r2(&y, &m).unwrap(), 0.0);
        assert!(matches!(pearson(&y, &m), Err(Error::UndefinedCorrelation)));
    }

    #[test]
    fn standardized_r2_is_one_minus_mse() {
        let y = crate::targets::standardize(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]).unwrap().values;
        let yhat: Vec<f64> = y.iter().enumerate().map(|(i, v)| 0.6 * v + 0.1 * (i as f64).sin()).collect();
        let (m, r) = (mse(&y, &yhat).unwrap(), r2(&y, &yhat).unwrap());
        assert!((r - (1.0 - m)).abs() < 1e-12);
    }

    #[test]
    fn pearson_affine_invariance() {
        let y = [0.3, 1.2, -0.7, 2.2, 0.0];
        let p = [0.1, 1.0, -0.2, 1.5, 0.4];
        let q: Vec<f64> = p.iter().map(|v| 3.0 * v - 2.0).collect();
        assert!((pearson(&y, &p).unwrap() - pearson(&y, &q).unwrap()).abs() < 1e-12);
        assert!((r2(&y, &p).unwrap() - r2(&y, &q).unwrap()).abs() > 1e-3);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(mse(&[1.0], &[1.0]), Err(Error::Contract(_))));
        assert!(matches!(mse(&[1.0, 2.0], &[1.0]), Err(Error::Contract(_))));
        assert!(matches!(r2(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::DegenerateTarget(_))));
    }

    #[test]
    fn splits() {
        let f = loo_split(16, 3, 2, 42).unwrap();
        assert_eq!((f.train.len(), f.validation.len()), (13, 2));
        assert!(!f.validation.contains(&3) && !f.train.contains(&3));
        assert_eq!(f, loo_split(16, 3, 2, 42).unwrap());
        let g = loo_split(3, 0, 1, 0).unwrap();
        assert_eq!((g.train.len(), g.validation.len()), (1, 1));
        assert!(matches!(loo_split(3, 0, 2, 0), Err(Error::Config(_))));
        let mut all: Vec<usize> = f.train.iter().chain(&f.validation).copied().collect();
        all.push(3);
        all.sort();
        assert_eq!(all, (0..16).collect::<Vec<_>>());
    }
}
