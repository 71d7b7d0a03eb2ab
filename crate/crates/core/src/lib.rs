//! Short-horizon wireless channel prediction toolkit.
//!
//! Fading traces come from a Clarke sum-of-sinusoids simulator or a CSV
//! file. They are reduced to small-scale fading, framed into sliding
//! windows and fed to linear, feedforward, LSTM, GRU and 1-D CNN
//! predictors built on a small dense-matrix network kit.

pub mod coherence;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod matrix;
pub mod models;
pub mod nn;
pub mod preprocess;
pub mod signal;
pub mod special;
pub mod windowing;

pub use error::{Error, Result};
pub use matrix::Matrix;
