//! Numeric building blocks with hand-written backward passes.
//!
//! Everything runs in `f64`. Layers are plain functions over [`Matrix`] and
//! slices; parameters live in a [`ParamStore`] so the optimizer, the
//! checkpoint writer and the gradient checker can treat them uniformly.

mod adam;
mod checkpoint;
mod conv;
mod dropout;
mod embedding;
mod gradcheck;
mod linear;
mod loss;
mod lstm;
mod matrix;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use conv::{conv_maxpool_backward, conv_maxpool_forward, ConvCache};
pub use dropout::{dropout, dropout_backward, Mode};
pub use embedding::{embedding_backward, embedding_forward};
pub use gradcheck::{grad_check, GradCheckReport};
pub use linear::{linear_backward, linear_forward};
pub use loss::{joint_loss, softmax, softmax_xent, softmax_xent_backward, squared_error, squared_error_backward};
pub use lstm::{lstm_step, lstm_step_backward, LstmCache, LstmGrads, LstmParams};
pub use matrix::{axpy, dot, Matrix};
pub use params::{Grads, Param, ParamId, ParamStore};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
