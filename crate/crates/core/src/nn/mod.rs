//! Minimal trainable-layer kit with hand-derived gradients.
//!
//! Layers take row-major batches (`N` rows). Recurrent layers consume a
//! window one step at a time and are differentiated through every step.

mod adam;
mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod gru;
pub(crate) mod init;
mod loss;
mod lstm;
mod network;
mod params;

pub use adam::AdamState;
pub use conv::{conv1d_forward, Conv1dParams};
pub use dense::{dense_forward, Activation, DenseParams};
pub use dropout::{dropout_apply, dropout_mask};
pub use gradcheck::{gradient_check, GradCheckReport, GradientCheck};
pub use gru::{gru_step, GruParams};
pub use loss::mse_loss;
pub use lstm::{lstm_step, LstmParams};
pub use network::{ForwardCache, Gradients, Layer, Mode, Network};
pub use params::{NamedTensor, ParameterSet};

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
