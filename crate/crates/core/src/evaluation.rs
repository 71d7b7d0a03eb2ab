//! Per-step RMSE and MAE over test examples.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::ModelDescriptor;

fn check(pred: &Matrix, target: &Matrix) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())));
    }
    if pred.rows() == 0 {
        return Err(Error::Shape("no examples to evaluate".into()));
    }
    Ok(())
}

fn per_step(pred: &Matrix, target: &Matrix, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut acc = vec![0.0; pred.cols()];
    for r in 0..pred.rows() {
        for ((a, p), t) in acc.iter_mut().zip(pred.row(r)).zip(target.row(r)) {
            *a += f(p - t);
        }
    }
    let n = pred.rows() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// `sqrt(mean_m (pred[m][n] - target[m][n])^2)` for each step `n`.
pub fn rmse_per_step(pred: &Matrix, target: &Matrix) -> Result<Vec<f64>> {
    check(pred, target)?;
    Ok(per_step(pred, target, |e| e * e).into_iter().map(f64::sqrt).collect())
}

/// `mean_m |pred[m][n] - target[m][n]|` for each step `n`.
pub fn mae_per_step(pred: &Matrix, target: &Matrix) -> Result<Vec<f64>> {
    check(pred, target)?;
    Ok(per_step(pred, target, f64::abs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rmse_per_step: Vec<f64>,
    pub mae_per_step: Vec<f64>,
    pub rmse_mean: f64,
    pub mae_mean: f64,
    pub num_test_examples: usize,
    pub descriptor: ModelDescriptor,
    pub seed: u64,
    pub train_time_s: f64,
}

impl EvalReport {
    /// Converts errors measured on a min-max scaled series back to physical
    /// units by multiplying with the scaler's inverse slope.
    pub fn to_physical(&self, inverse_slope: f64) -> EvalReport {
        let s = inverse_slope.abs();
        EvalReport {
            rmse_per_step: self.rmse_per_step.iter().map(|v| v * s).collect(),
            mae_per_step: self.mae_per_step.iter().map(|v| v * s).collect(),
            rmse_mean: self.rmse_mean * s,
            mae_mean: self.mae_mean * s,
            ..self.clone()
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn aggregate_report(
    pred: &Matrix,
    target: &Matrix,
    descriptor: &ModelDescriptor,
    seed: u64,
    train_time_s: f64,
) -> Result<EvalReport> {
    let rmse = rmse_per_step(pred, target)?;
    let mae = mae_per_step(pred, target)?;
    Ok(EvalReport {
        rmse_mean: mean(&rmse),
        mae_mean: mean(&mae),
        rmse_per_step: rmse,
        mae_per_step: mae,
        num_test_examples: pred.rows(),
        descriptor: *descriptor,
        seed,
        train_time_s,
    })
}
