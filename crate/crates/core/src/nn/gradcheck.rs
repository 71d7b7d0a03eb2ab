use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::mse_loss;
use super::network::{Mode, Network};
use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub epsilon: f64,
    /// Check every coordinate when the network has at most this many,
    /// otherwise a random subset of this size.
    pub max_coordinates: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for GradientCheck {
    fn default() -> Self {
        Self { epsilon: 1e-5, max_coordinates: 2000, seed: 0, mode: Mode::Eval }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor holding the worst coordinate.
    pub worst: String,
    pub coordinates_checked: usize,
}

/// Compares analytic MSE gradients with central finite differences.
///
/// Relative error per coordinate is `|a - n| / (|a| + |n| + 1e-12)`.
pub fn gradient_check(net: &Network, inputs: &Matrix, targets: &Matrix, opts: &GradientCheck) -> Result<GradCheckReport> {
    let (_, grads) = net.loss_and_gradients(inputs, targets, opts.mode)?;
    let analytic: Vec<f64> = grads.tensors().iter().flat_map(|m| m.as_slice().iter().copied()).collect();
    let names: Vec<(String, usize)> = net.named_tensors().into_iter().map(|(n, m)| (n, m.len())).collect();
    let total = analytic.len();

    let coords: Vec<usize> = if total <= opts.max_coordinates {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut v = sample(&mut rng, total, opts.max_coordinates.max(200)).into_vec();
        v.sort_unstable();
        v
    };

    let mut probe = net.clone();
    let loss_at = |net: &Network| -> Result<f64> {
        let (pred, _) = net.forward(inputs, opts.mode)?;
        Ok(mse_loss(&pred, targets)?.0)
    };
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: String::new(), coordinates_checked: coords.len() };
    for &flat in &coords {
        let (tensor, offset) = locate(&names, flat);
        let original = probe.tensors_mut()[tensor].as_slice()[offset];
        probe.tensors_mut()[tensor].as_mut_slice()[offset] = original + opts.epsilon;
        let plus = loss_at(&probe)?;
        probe.tensors_mut()[tensor].as_mut_slice()[offset] = original - opts.epsilon;
        let minus = loss_at(&probe)?;
        probe.tensors_mut()[tensor].as_mut_slice()[offset] = original;

        let numeric = (plus - minus) / (2.0 * opts.epsilon);
        let a = analytic[flat];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = format!("{}[{offset}]", names[tensor].0);
        }
    }
    Ok(report)
}

fn locate(sizes: &[(String, usize)], mut flat: usize) -> (usize, usize) {
    for (i, (_, len)) in sizes.iter().enumerate() {
        if flat < *len {
            return (i, flat);
        }
        flat -= len;
    }
    unreachable!("coordinate beyond parameter count")
}
