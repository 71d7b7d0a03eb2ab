use rand::Rng;

use super::init::glorot;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        }
    }

    pub(crate) fn apply(self, m: &mut Matrix) {
        if self == Activation::Relu {
            m.map_inplace(|x| x.max(0.0));
        }
    }

    /// Multiplies `grad` by the derivative, given the activated output.
    pub(crate) fn backprop(self, grad: &mut Matrix, output: &Matrix) {
        if self == Activation::Relu {
            for (g, &y) in grad.as_mut_slice().iter_mut().zip(output.as_slice()) {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

/// Fully connected layer `g(XW + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `in x out`
    pub w: Matrix,
    /// `1 x out`
    pub b: Matrix,
    pub activation: Activation,
}

impl DenseParams {
    pub fn new(w: Matrix, b: Matrix, activation: Activation) -> Result<Self> {
        b.ensure_shape(1, w.cols(), "dense bias")?;
        Ok(Self { w, b, activation })
    }

    pub fn glorot(inputs: usize, outputs: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Self { w: glorot(inputs, outputs, inputs, outputs, rng), b: Matrix::zeros(1, outputs), activation }
    }

    pub fn inputs(&self) -> usize {
        self.w.rows()
    }

    pub fn outputs(&self) -> usize {
        self.w.cols()
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: Matrix::zeros(1, self.b.cols()),
            activation: self.activation,
        }
    }

    pub(crate) fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.inputs() {
            return Err(Error::Shape(format!("dense layer expects {} inputs, got {}", self.inputs(), x.cols())));
        }
        let mut out = Matrix::zeros(x.rows(), self.outputs());
        x.matmul_acc(&self.w, &mut out);
        out.add_row_broadcast(&self.b);
        self.activation.apply(&mut out);
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads` and returns the input
    /// gradient when requested.
    pub(crate) fn backward(
        &self,
        input: &Matrix,
        output: &Matrix,
        dout: &Matrix,
        grads: &mut DenseParams,
        need_dx: bool,
    ) -> Option<Matrix> {
        let mut da = dout.clone();
        self.activation.backprop(&mut da, output);
        input.t_matmul_acc(&da, &mut grads.w);
        da.sum_rows_into(&mut grads.b);
        need_dx.then(|| {
            let mut dx = Matrix::zeros(input.rows(), self.inputs());
            da.matmul_t_acc(&self.w, &mut dx);
            dx
        })
    }
}

pub fn dense_forward(params: &DenseParams, x: &Matrix) -> Result<Matrix> {
    params.forward(x)
}
