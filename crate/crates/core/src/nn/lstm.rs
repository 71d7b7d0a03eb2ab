use rand::Rng;

use super::init::glorot;
use super::sigmoid;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// LSTM cell weights. Input weights are `in x h`, recurrent weights `h x h`,
/// biases `1 x h`. Gate suffixes: forget, input, output, cell candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_xf: Matrix,
    pub w_xi: Matrix,
    pub w_xo: Matrix,
    pub w_xc: Matrix,
    pub w_hf: Matrix,
    pub w_hi: Matrix,
    pub w_ho: Matrix,
    pub w_hc: Matrix,
    pub b_f: Matrix,
    pub b_i: Matrix,
    pub b_o: Matrix,
    pub b_c: Matrix,
}

/// Activations kept from one forward step.
#[derive(Debug, Clone)]
pub(crate) struct LstmStep {
    x: Matrix,
    h_prev: Matrix,
    c_prev: Matrix,
    f: Matrix,
    i: Matrix,
    o: Matrix,
    g: Matrix,
    tanh_c: Matrix,
}

impl LstmParams {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        let x = || Matrix::zeros(inputs, hidden);
        let h = || Matrix::zeros(hidden, hidden);
        let b = || Matrix::zeros(1, hidden);
        Self {
            w_xf: x(),
            w_xi: x(),
            w_xo: x(),
            w_xc: x(),
            w_hf: h(),
            w_hi: h(),
            w_ho: h(),
            w_hc: h(),
            b_f: b(),
            b_i: b(),
            b_o: b(),
            b_c: b(),
        }
    }

    pub fn glorot(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(inputs, hidden);
        for w in [&mut p.w_xf, &mut p.w_xi, &mut p.w_xo, &mut p.w_xc] {
            *w = glorot(inputs, hidden, inputs, hidden, rng);
        }
        for w in [&mut p.w_hf, &mut p.w_hi, &mut p.w_ho, &mut p.w_hc] {
            *w = glorot(hidden, hidden, hidden, hidden, rng);
        }
        p
    }

    pub fn inputs(&self) -> usize {
        self.w_xf.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_xf.cols()
    }

    pub(crate) fn tensors(&self) -> [(&'static str, &Matrix); 12] {
        [
            ("W_xf", &self.w_xf),
            ("W_xi", &self.w_xi),
            ("W_xo", &self.w_xo),
            ("W_xc", &self.w_xc),
            ("W_hf", &self.w_hf),
            ("W_hi", &self.w_hi),
            ("W_ho", &self.w_ho),
            ("W_hc", &self.w_hc),
            ("b_f", &self.b_f),
            ("b_i", &self.b_i),
            ("b_o", &self.b_o),
            ("b_c", &self.b_c),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Matrix; 12] {
        [
            &mut self.w_xf,
            &mut self.w_xi,
            &mut self.w_xo,
            &mut self.w_xc,
            &mut self.w_hf,
            &mut self.w_hi,
            &mut self.w_ho,
            &mut self.w_hc,
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_o,
            &mut self.b_c,
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

    fn gate(&self, x: &Matrix, h: &Matrix, wx: &Matrix, wh: &Matrix, b: &Matrix, squash: fn(f64) -> f64) -> Matrix {
        let mut a = Matrix::zeros(x.rows(), self.hidden());
        x.matmul_acc(wx, &mut a);
        h.matmul_acc(wh, &mut a);
        a.add_row_broadcast(b);
        a.map_inplace(squash);
        a
    }

    pub(crate) fn step(&self, x: &Matrix, h_prev: &Matrix, c_prev: &Matrix) -> Result<(Matrix, Matrix, LstmStep)> {
        let n = x.rows();
        if x.cols() != self.inputs() {
            return Err(Error::Shape(format!("lstm expects {} inputs per step, got {}", self.inputs(), x.cols())));
        }
        h_prev.ensure_shape(n, self.hidden(), "lstm hidden state")?;
        c_prev.ensure_shape(n, self.hidden(), "lstm cell state")?;
        let f = self.gate(x, h_prev, &self.w_xf, &self.w_hf, &self.b_f, sigmoid);
        let i = self.gate(x, h_prev, &self.w_xi, &self.w_hi, &self.b_i, sigmoid);
        let o = self.gate(x, h_prev, &self.w_xo, &self.w_ho, &self.b_o, sigmoid);
        let g = self.gate(x, h_prev, &self.w_xc, &self.w_hc, &self.b_c, f64::tanh);
        let mut c = f.zip_map(c_prev, |a, b| a * b);
        c.add_assign(&i.zip_map(&g, |a, b| a * b));
        let tanh_c = c.map(f64::tanh);
        let h = tanh_c.zip_map(&o, |a, b| a * b);
        if !c.all_finite() || !h.all_finite() {
            return Err(Error::Diverged(0));
        }
        let cache = LstmStep { x: x.clone(), h_prev: h_prev.clone(), c_prev: c_prev.clone(), f, i, o, g, tanh_c };
        Ok((h, c, cache))
    }

    /// Runs the window from zero state; returns every hidden state.
    pub(crate) fn forward_seq(&self, xs: &[Matrix]) -> Result<(Vec<Matrix>, Vec<LstmStep>)> {
        self.check_shapes()?;
        let n = xs.first().map_or(0, Matrix::rows);
        let mut h = Matrix::zeros(n, self.hidden());
        let mut c = Matrix::zeros(n, self.hidden());
        let mut hs = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let (h_next, c_next, cache) = self.step(x, &h, &c)?;
            hs.push(h_next.clone());
            caches.push(cache);
            h = h_next;
            c = c_next;
        }
        Ok((hs, caches))
    }

    /// Backpropagation through time. `dhs[t]` is the loss gradient arriving
    /// at hidden state `t` from above (zero where the state is unused).
    pub(crate) fn backward_seq(
        &self,
        caches: &[LstmStep],
        dhs: &[Matrix],
        grads: &mut LstmParams,
        need_dx: bool,
    ) -> Vec<Matrix> {
        let n = caches.first().map_or(0, |c| c.x.rows());
        let hidden = self.hidden();
        let mut dh_next = Matrix::zeros(n, hidden);
        let mut dc_next = Matrix::zeros(n, hidden);
        let mut dxs = vec![Matrix::zeros(0, 0); if need_dx { caches.len() } else { 0 }];
        for t in (0..caches.len()).rev() {
            let s = &caches[t];
            let mut dh = dhs[t].clone();
            dh.add_assign(&dh_next);

            let mut da_f = Matrix::zeros(n, hidden);
            let mut da_i = Matrix::zeros(n, hidden);
            let mut da_o = Matrix::zeros(n, hidden);
            let mut da_g = Matrix::zeros(n, hidden);
            let mut dc_prev = Matrix::zeros(n, hidden);
            for k in 0..n * hidden {
                let dh_k = dh.as_slice()[k];
                let (f, i, o, g, tc) =
                    (s.f.as_slice()[k], s.i.as_slice()[k], s.o.as_slice()[k], s.g.as_slice()[k], s.tanh_c.as_slice()[k]);
                let dc = dh_k * o * (1.0 - tc * tc) + dc_next.as_slice()[k];
                da_o.as_mut_slice()[k] = dh_k * tc * o * (1.0 - o);
                da_f.as_mut_slice()[k] = dc * s.c_prev.as_slice()[k] * f * (1.0 - f);
                da_i.as_mut_slice()[k] = dc * g * i * (1.0 - i);
                da_g.as_mut_slice()[k] = dc * i * (1.0 - g * g);
                dc_prev.as_mut_slice()[k] = dc * f;
            }

            let mut dh_prev = Matrix::zeros(n, hidden);
            let gates = [
                (&da_f, &self.w_xf, &self.w_hf),
                (&da_i, &self.w_xi, &self.w_hi),
                (&da_o, &self.w_xo, &self.w_ho),
                (&da_g, &self.w_xc, &self.w_hc),
            ];
            let mut dx = need_dx.then(|| Matrix::zeros(n, self.inputs()));
            for (da, wx, wh) in gates {
                da.matmul_t_acc(wh, &mut dh_prev);
                if let Some(dx) = dx.as_mut() {
                    da.matmul_t_acc(wx, dx);
                }
            }
            s.x.t_matmul_acc(&da_f, &mut grads.w_xf);
            s.x.t_matmul_acc(&da_i, &mut grads.w_xi);
            s.x.t_matmul_acc(&da_o, &mut grads.w_xo);
            s.x.t_matmul_acc(&da_g, &mut grads.w_xc);
            s.h_prev.t_matmul_acc(&da_f, &mut grads.w_hf);
            s.h_prev.t_matmul_acc(&da_i, &mut grads.w_hi);
            s.h_prev.t_matmul_acc(&da_o, &mut grads.w_ho);
            s.h_prev.t_matmul_acc(&da_g, &mut grads.w_hc);
            da_f.sum_rows_into(&mut grads.b_f);
            da_i.sum_rows_into(&mut grads.b_i);
            da_o.sum_rows_into(&mut grads.b_o);
            da_g.sum_rows_into(&mut grads.b_c);

            if let Some(dx) = dx {
                dxs[t] = dx;
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        dxs
    }
}

/// One LSTM step: returns `(h_t, c_t)`.
pub fn lstm_step(params: &LstmParams, x_t: &Matrix, h_prev: &Matrix, c_prev: &Matrix) -> Result<(Matrix, Matrix)> {
    params.check_shapes()?;
    let (h, c, _) = params.step(x_t, h_prev, c_prev)?;
    Ok((h, c))
}
