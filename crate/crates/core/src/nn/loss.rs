use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Mean squared error over all entries and its gradient `2(pred - target)/count`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.len().max(1) as f64;
    let diff = pred.zip_map(target, |p, t| p - t);
    let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / count;
    let grad = diff.map(|d| 2.0 * d / count);
    Ok((loss, grad))
}
