use rand::Rng;

use super::init::glorot;
use super::sigmoid;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// GRU cell weights: update gate `u`, reset gate `r`, candidate `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_xu: Matrix,
    pub w_xr: Matrix,
    pub w_xh: Matrix,
    pub w_hu: Matrix,
    pub w_hr: Matrix,
    pub w_hh: Matrix,
    pub b_u: Matrix,
    pub b_r: Matrix,
    pub b_h: Matrix,
}

#[derive(Debug, Clone)]
pub(crate) struct GruStep {
    x: Matrix,
    h_prev: Matrix,
    u: Matrix,
    r: Matrix,
    /// `r ⊙ h_prev`
    rh: Matrix,
    cand: Matrix,
}

impl GruParams {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        let x = || Matrix::zeros(inputs, hidden);
        let h = || Matrix::zeros(hidden, hidden);
        let b = || Matrix::zeros(1, hidden);
        Self { w_xu: x(), w_xr: x(), w_xh: x(), w_hu: h(), w_hr: h(), w_hh: h(), b_u: b(), b_r: b(), b_h: b() }
    }

    pub fn glorot(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(inputs, hidden);
        for w in [&mut p.w_xu, &mut p.w_xr, &mut p.w_xh] {
            *w = glorot(inputs, hidden, inputs, hidden, rng);
        }
        for w in [&mut p.w_hu, &mut p.w_hr, &mut p.w_hh] {
            *w = glorot(hidden, hidden, hidden, hidden, rng);
        }
        p
    }

    pub fn inputs(&self) -> usize {
        self.w_xu.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_xu.cols()
    }

    pub(crate) fn tensors(&self) -> [(&'static str, &Matrix); 9] {
        [
            ("W_xu", &self.w_xu),
            ("W_xr", &self.w_xr),
            ("W_xh", &self.w_xh),
            ("W_hu", &self.w_hu),
            ("W_hr", &self.w_hr),
            ("W_hh", &self.w_hh),
            ("b_u", &self.b_u),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Matrix; 9] {
        [
            &mut self.w_xu,
            &mut self.w_xr,
            &mut self.w_xh,
            &mut self.w_hu,
            &mut self.w_hr,
            &mut self.w_hh,
            &mut self.b_u,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    fn check_shapes(&self) -> Result<()> {
        let (n_in, h) = (self.inputs(), self.hidden());
        for (name, m) in self.tensors() {
            let expected = match name.as_bytes()[..3] {
                [b'W', b'_', b'x'] => (n_in, h),
                [b'W', b'_', b'h'] => (h, h),
                _ => (1, h),
            };
            m.ensure_shape(expected.0, expected.1, name)?;
        }
        Ok(())
    }

    pub(crate) fn step(&self, x: &Matrix, h_prev: &Matrix) -> Result<(Matrix, GruStep)> {
        let n = x.rows();
        let hidden = self.hidden();
        if x.cols() != self.inputs() {
            return Err(Error::Shape(format!("gru expects {} inputs per step, got {}", self.inputs(), x.cols())));
        }
        h_prev.ensure_shape(n, hidden, "gru hidden state")?;

        let affine = |input: &Matrix, wx: &Matrix, state: &Matrix, wh: &Matrix, b: &Matrix| {
            let mut a = Matrix::zeros(n, hidden);
            input.matmul_acc(wx, &mut a);
            state.matmul_acc(wh, &mut a);
            a.add_row_broadcast(b);
            a
        };
        let mut u = affine(x, &self.w_xu, h_prev, &self.w_hu, &self.b_u);
        u.map_inplace(sigmoid);
        let mut r = affine(x, &self.w_xr, h_prev, &self.w_hr, &self.b_r);
        r.map_inplace(sigmoid);
        let rh = r.zip_map(h_prev, |a, b| a * b);
        let mut cand = affine(x, &self.w_xh, &rh, &self.w_hh, &self.b_h);
        cand.map_inplace(f64::tanh);

        let mut h = Matrix::zeros(n, hidden);
        for k in 0..n * hidden {
            let uk = u.as_slice()[k];
            h.as_mut_slice()[k] = uk * h_prev.as_slice()[k] + (1.0 - uk) * cand.as_slice()[k];
        }
        if !h.all_finite() {
            return Err(Error::Diverged(0));
        }
        Ok((h, GruStep { x: x.clone(), h_prev: h_prev.clone(), u, r, rh, cand }))
    }

    pub(crate) fn forward_seq(&self, xs: &[Matrix]) -> Result<(Vec<Matrix>, Vec<GruStep>)> {
        self.check_shapes()?;
        let n = xs.first().map_or(0, Matrix::rows);
        let mut h = Matrix::zeros(n, self.hidden());
        let mut hs = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let (next, cache) = self.step(x, &h)?;
            hs.push(next.clone());
            caches.push(cache);
            h = next;
        }
        Ok((hs, caches))
    }

    pub(crate) fn backward_seq(
        &self,
        caches: &[GruStep],
        dhs: &[Matrix],
        grads: &mut GruParams,
        need_dx: bool,
    ) -> Vec<Matrix> {
        let n = caches.first().map_or(0, |c| c.x.rows());
        let hidden = self.hidden();
        let mut dh_next = Matrix::zeros(n, hidden);
        let mut dxs = vec![Matrix::zeros(0, 0); if need_dx { caches.len() } else { 0 }];
        for t in (0..caches.len()).rev() {
            let s = &caches[t];
            let mut dh = dhs[t].clone();
            dh.add_assign(&dh_next);

            let mut da_u = Matrix::zeros(n, hidden);
            let mut da_h = Matrix::zeros(n, hidden);
            let mut dh_prev = Matrix::zeros(n, hidden);
            for k in 0..n * hidden {
                let (d, u, c, hp) = (dh.as_slice()[k], s.u.as_slice()[k], s.cand.as_slice()[k], s.h_prev.as_slice()[k]);
                da_u.as_mut_slice()[k] = d * (hp - c) * u * (1.0 - u);
                da_h.as_mut_slice()[k] = d * (1.0 - u) * (1.0 - c * c);
                dh_prev.as_mut_slice()[k] = d * u;
            }

            // Candidate path through the reset gate.
            let mut d_rh = Matrix::zeros(n, hidden);
            da_h.matmul_t_acc(&self.w_hh, &mut d_rh);
            let mut da_r = Matrix::zeros(n, hidden);
            for k in 0..n * hidden {
                let (drh, r, hp) = (d_rh.as_slice()[k], s.r.as_slice()[k], s.h_prev.as_slice()[k]);
                da_r.as_mut_slice()[k] = drh * hp * r * (1.0 - r);
                dh_prev.as_mut_slice()[k] += drh * r;
            }
            da_u.matmul_t_acc(&self.w_hu, &mut dh_prev);
            da_r.matmul_t_acc(&self.w_hr, &mut dh_prev);

            s.x.t_matmul_acc(&da_u, &mut grads.w_xu);
            s.x.t_matmul_acc(&da_r, &mut grads.w_xr);
            s.x.t_matmul_acc(&da_h, &mut grads.w_xh);
            s.h_prev.t_matmul_acc(&da_u, &mut grads.w_hu);
            s.h_prev.t_matmul_acc(&da_r, &mut grads.w_hr);
            s.rh.t_matmul_acc(&da_h, &mut grads.w_hh);
            da_u.sum_rows_into(&mut grads.b_u);
            da_r.sum_rows_into(&mut grads.b_r);
            da_h.sum_rows_into(&mut grads.b_h);

            if need_dx {
                let mut dx = Matrix::zeros(n, self.inputs());
                da_u.matmul_t_acc(&self.w_xu, &mut dx);
                da_r.matmul_t_acc(&self.w_xr, &mut dx);
                da_h.matmul_t_acc(&self.w_xh, &mut dx);
                dxs[t] = dx;
            }
            dh_next = dh_prev;
        }
        dxs
    }
}

/// One GRU step: returns `h_t`.
pub fn gru_step(params: &GruParams, x_t: &Matrix, h_prev: &Matrix) -> Result<Matrix> {
    params.check_shapes()?;
    Ok(params.step(x_t, h_prev)?.0)
}
