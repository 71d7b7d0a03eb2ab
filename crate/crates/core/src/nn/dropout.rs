use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else
/// `1 / (1 - rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, seed: u64) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    let keep = 1.0 / (1.0 - rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Applies inverted dropout in training mode; identity otherwise.
pub fn dropout_apply(x: &Matrix, rate: f64, training: bool, seed: u64) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.rows(), x.cols(), rate, seed)?;
    Ok(x.zip_map(&mask, |a, m| a * m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_cases() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(dropout_apply(&x, 0.0, true, 1).unwrap(), x);
        assert_eq!(dropout_apply(&x, 0.7, false, 1).unwrap(), x);
        assert!(dropout_apply(&x, 1.0, true, 1).is_err());
    }

    #[test]
    fn expectation_is_preserved() {
        let ones = Matrix::filled(1000, 1000, 1.0);
        let out = dropout_apply(&ones, 0.3, true, 42).unwrap();
        let mean = out.as_slice().iter().sum::<f64>() / out.len() as f64;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        assert_eq!(out, dropout_apply(&ones, 0.3, true, 42).unwrap());
    }
}
