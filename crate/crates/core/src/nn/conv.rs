use rand::Rng;

use super::dense::Activation;
use super::init::glorot;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Valid-mode 1-D convolution in cross-correlation orientation.
///
/// Batches are stored as `N x (channels * length)`, channel-major within a
/// row; the output has one channel per kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dParams {
    /// `num_kernels x (in_channels * kernel_size)`
    pub kernels: Matrix,
    /// `1 x num_kernels`
    pub biases: Matrix,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub activation: Activation,
}

impl Conv1dParams {
    pub fn new(kernels: Matrix, biases: Matrix, in_channels: usize, activation: Activation) -> Result<Self> {
        if in_channels == 0 || kernels.cols() % in_channels != 0 || kernels.cols() == 0 {
            return Err(Error::Shape(format!(
                "kernel width {} is not a positive multiple of {in_channels} channels",
                kernels.cols()
            )));
        }
        biases.ensure_shape(1, kernels.rows(), "conv biases")?;
        let kernel_size = kernels.cols() / in_channels;
        Ok(Self { kernels, biases, in_channels, kernel_size, activation })
    }

    pub fn glorot(
        in_channels: usize,
        num_kernels: usize,
        kernel_size: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            kernels: glorot(
                num_kernels,
                in_channels * kernel_size,
                in_channels * kernel_size,
                num_kernels * kernel_size,
                rng,
            ),
            biases: Matrix::zeros(1, num_kernels),
            in_channels,
            kernel_size,
            activation,
        }
    }

    pub fn num_kernels(&self) -> usize {
        self.kernels.rows()
    }

    /// Output length for an input of `len` samples per channel.
    pub fn output_len(&self, len: usize) -> Option<usize> {
        (len >= self.kernel_size).then(|| len - self.kernel_size + 1)
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            kernels: Matrix::zeros(self.kernels.rows(), self.kernels.cols()),
            biases: Matrix::zeros(1, self.biases.cols()),
            ..*self
        }
    }

    fn input_len(&self, x: &Matrix) -> Result<usize> {
        if x.cols() % self.in_channels != 0 {
            return Err(Error::Shape(format!("{} columns do not split into {} channels", x.cols(), self.in_channels)));
        }
        let len = x.cols() / self.in_channels;
        if len < self.kernel_size {
            return Err(Error::Shape(format!("input length {len} is shorter than kernel size {}", self.kernel_size)));
        }
        Ok(len)
    }

    pub(crate) fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let len = self.input_len(x)?;
        let out_len = len - self.kernel_size + 1;
        let (k_count, ks, ch) = (self.num_kernels(), self.kernel_size, self.in_channels);
        let mut out = Matrix::zeros(x.rows(), k_count * out_len);
        for n in 0..x.rows() {
            let xr = x.row(n);
            let or = out.row_mut(n);
            for k in 0..k_count {
                let w = self.kernels.row(k);
                let b = self.biases.as_slice()[k];
                let dst = &mut or[k * out_len..(k + 1) * out_len];
                dst.iter_mut().for_each(|v| *v = b);
                for c in 0..ch {
                    let src = &xr[c * len..(c + 1) * len];
                    for j in 0..ks {
                        let wj = w[c * ks + j];
                        for (d, s) in dst.iter_mut().zip(&src[j..j + out_len]) {
                            *d += wj * s;
                        }
                    }
                }
            }
        }
        self.activation.apply(&mut out);
        Ok(out)
    }

    pub(crate) fn backward(
        &self,
        input: &Matrix,
        output: &Matrix,
        dout: &Matrix,
        grads: &mut Conv1dParams,
        need_dx: bool,
    ) -> Option<Matrix> {
        let len = input.cols() / self.in_channels;
        let out_len = len - self.kernel_size + 1;
        let (k_count, ks, ch) = (self.num_kernels(), self.kernel_size, self.in_channels);
        let mut da = dout.clone();
        self.activation.backprop(&mut da, output);
        let mut dx = need_dx.then(|| Matrix::zeros(input.rows(), input.cols()));
        for n in 0..input.rows() {
            let xr = input.row(n);
            let dr = da.row(n);
            for k in 0..k_count {
                let g = &dr[k * out_len..(k + 1) * out_len];
                grads.biases.as_mut_slice()[k] += g.iter().sum::<f64>();
                let w = self.kernels.row(k);
                let gw = grads.kernels.row_mut(k);
                for c in 0..ch {
                    let src = &xr[c * len..(c + 1) * len];
                    for j in 0..ks {
                        gw[c * ks + j] += g.iter().zip(&src[j..j + out_len]).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                if let Some(dx) = dx.as_mut() {
                    let dxr = dx.row_mut(n);
                    for c in 0..ch {
                        let dst = &mut dxr[c * len..(c + 1) * len];
                        for j in 0..ks {
                            let wj = w[c * ks + j];
                            for (d, gv) in dst[j..j + out_len].iter_mut().zip(g) {
                                *d += wj * gv;
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Convolves every row of `x` (single channel, length `T`) with every
/// kernel; the result is `N x (num_kernels * (T - kernel_size + 1))`.
pub fn conv1d_forward(params: &Conv1dParams, x: &Matrix) -> Result<Matrix> {
    params.forward(x)
}
