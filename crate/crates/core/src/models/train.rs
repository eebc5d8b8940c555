//! Full-batch gradient training with norm clipping and early stopping on
//! validation MSE.

use serde::{Deserialize, Serialize};

use super::{fit_linear, gradients, ModelParams, Sequence, Variant, DEFAULT_HIDDEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain gradient descent.
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub ridge: f64,
    pub validation_pieces: usize,
    pub hidden: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Fit the linear variant by gradient descent instead of in closed form.
    pub linear_by_gradient: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.01,
            max_epochs: 2000,
            patience: 20,
            clip_norm: 5.0,
            ridge: 0.1,
            validation_pieces: 2,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
            optimizer: Optimizer::Adam,
            linear_by_gradient: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max epochs must be positive");
        }
        if self.patience >= self.max_epochs {
            return bad("patience must be smaller than max epochs");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip norm must be positive");
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad("ridge penalty must be non-negative");
        }
        if self.hidden == 0 {
            return bad("hidden size must be positive");
        }
        Ok(())
    }
}

/// Per-epoch losses: training loss (½ MSE) of the parameters entering the
/// epoch and their validation MSE.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainTrace {
    pub train_loss: Vec<f64>,
    pub validation_mse: Vec<f64>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub trace: TrainTrace,
}

fn mse(p: &ModelParams, data: &[Sequence]) -> Result<f64> {
    Ok(2.0 * super::loss(p, data)?)
}

/// Fit one variant on `train`, early-stopping on `validation`.
///
/// The linear variant is solved in closed form unless
/// `linear_by_gradient` is set. Gradient training returns the parameters of
/// the epoch with the lowest validation MSE; with `patience` 0 that is the
/// initialization.
pub fn train(variant: Variant, train: &[Sequence], validation: &[Sequence], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let inputs = train
        .first()
        .map(|s| s.x.ncols())
        .ok_or_else(|| Error::Config("no training pieces".into()))?;
    if train.iter().chain(validation).any(|s| s.x.ncols() != inputs) {
        return Err(Error::Contract("pieces disagree on the number of columns".into()));
    }

    if variant == Variant::Linear && !config.linear_by_gradient {
        let rows: usize = train.iter().map(|s| s.y.len()).sum();
        let mut x = nalgebra::DMatrix::zeros(rows, inputs);
        let mut y = Vec::with_capacity(rows);
        let mut r = 0;
        for s in train {
            x.rows_mut(r, s.y.len()).copy_from(&s.x);
            y.extend(&s.y);
            r += s.y.len();
        }
        let mut params = ModelParams::zeros(Variant::Linear, inputs, 0);
        params.seed = config.seed;
        params.weights = fit_linear(&x, &y, config.ridge)?;
        let train_loss = super::loss(&params, train)?;
        let val = if validation.is_empty() { f64::NAN } else { mse(&params, validation)? };
        let trace = TrainTrace { train_loss: vec![train_loss], validation_mse: vec![val], best_epoch: 0 };
        return Ok(TrainOutcome { params, trace });
    }

    let hidden = if variant == Variant::Linear { 0 } else { config.hidden };
    let mut params = ModelParams::init(variant, inputs, hidden, config.seed);
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;
    let mut trace = TrainTrace::default();
    let n = params.weights.len();
    let (mut m1, mut m2) = (vec![0.0; n], vec![0.0; n]);
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);

    for epoch in 0..=config.max_epochs {
        let (loss, mut g) = gradients(&params, train).map_err(|e| Error::Divergence { epoch, message: e.to_string() })?;
        let val = if validation.is_empty() { loss * 2.0 } else { mse(&params, validation)? };
        if !loss.is_finite() || !val.is_finite() {
            return Err(Error::Divergence { epoch, message: format!("loss {loss}, validation {val}") });
        }
        trace.train_loss.push(loss);
        trace.validation_mse.push(val);
        if val < best_val {
            best_val = val;
            best = params.clone();
            trace.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= config.patience || epoch == config.max_epochs {
            break;
        }

        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > config.clip_norm {
            let s = config.clip_norm / norm;
            g.iter_mut().for_each(|v| *v *= s);
        }
        match config.optimizer {
            Optimizer::Sgd => {
                for (w, d) in params.weights.iter_mut().zip(&g) {
                    *w -= config.learning_rate * d;
                }
            }
            Optimizer::Adam => {
                let t = (epoch + 1) as i32;
                let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                for i in 0..n {
                    m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
                    m2[i] = beta2 * m2[i] + (1.0 - beta2) * g[i] * g[i];
                    params.weights[i] -= config.learning_rate * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                }
            }
        }
    }
    Ok(TrainOutcome { params: best, trace })
}
