use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Adam optimizer state with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl AdamState {
    /// Zeroed moments shaped like `shapes`.
    pub fn new(step_size: f64, shapes: &[(usize, usize)]) -> Self {
        let zeros = || shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        Self { step_size, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, t: 0, m: zeros(), v: zeros() }
    }

    /// One update. `names` label parameters in error messages; all
    /// gradients are checked before anything is modified.
    pub fn update(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix], names: &[String]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::Shape(format!("tensor {i}: parameter and gradient shapes differ")));
            }
            if !g.all_finite() {
                return Err(Error::NonFiniteGradient(names.get(i).cloned().unwrap_or_else(|| i.to_string())));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let ps = p.as_mut_slice();
            let ms = m.as_mut_slice();
            let vs = v.as_mut_slice();
            for (k, &gk) in g.as_slice().iter().enumerate() {
                ms[k] = self.beta1 * ms[k] + (1.0 - self.beta1) * gk;
                vs[k] = self.beta2 * vs[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = ms[k] / bc1;
                let v_hat = vs[k] / bc2;
                ps[k] -= self.step_size * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn first_step_moves_by_step_size() {
        let mut state = AdamState::new(0.001, &[(1, 3)]);
        let mut p = Matrix::zeros(1, 3);
        let g = Matrix::row_vector(&[0.5, -2.0, 1e-3]);
        state.update(&mut [&mut p], &[&g], &names(1)).unwrap();
        for (x, gk) in p.as_slice().iter().zip(g.as_slice()) {
            assert!((x + 0.001 * gk.signum()).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn first_step_is_scale_invariant() {
        let mut state = AdamState::new(0.001, &[(1, 1), (1, 1)]);
        let (mut a, mut b) = (Matrix::zeros(1, 1), Matrix::zeros(1, 1));
        let ga = Matrix::row_vector(&[0.02]);
        let gb = Matrix::row_vector(&[20.0]);
        state.update(&mut [&mut a, &mut b], &[&ga, &gb], &names(2)).unwrap();
        assert!((a.as_slice()[0] - b.as_slice()[0]).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut state = AdamState::new(0.001, &[(2, 2)]);
        let mut p = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let before = p.clone();
        let g = Matrix::zeros(2, 2);
        for _ in 0..10 {
            state.update(&mut [&mut p], &[&g], &names(1)).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut state = AdamState::new(0.001, &[(1, 1)]);
        let mut p = Matrix::zeros(1, 1);
        let g = Matrix::row_vector(&[f64::NAN]);
        let err = state.update(&mut [&mut p], &[&g], &["layer0.W".to_string()]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "layer0.W"));
        assert_eq!(state.t, 0);
    }
}
