//! Minimal differentiable-layer library: dense, GRU, LSTM and dropout layers
//! with exact analytic backward passes, plus losses and optimizers.
//!
//! Everything is double precision and sample-at-a-time; the fixed two-channel
//! topology built on top of these layers is differentiated analytically, so
//! there is no general autodiff graph here.

pub mod dense;
pub mod dropout;
pub mod gru;
pub mod loss;
pub mod lstm;
pub mod mat;
pub mod optim;

pub use dense::{Dense, DenseCache};
pub use dropout::Dropout;
pub use gru::{GruCell, GruStepCache};
pub use loss::{loss, loss_grad, LossKind};
pub use lstm::{LstmCell, LstmStepCache};
pub use mat::Mat;
pub use optim::{Optimizer, OptimizerKind};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("stale forward cache: {0}")]
    StaleCache(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Activations available to the dense layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative given the pre-activation and the activated output.
    #[inline]
    pub fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
            Activation::Sigmoid => out * (1.0 - out),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Glorot-uniform initialization: U(±sqrt(6/(fan_in+fan_out))).
pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

/// Anything that owns trainable parameter tensors, flattened in a stable order.
pub trait ParamTensors {
    fn tensors(&mut self) -> Vec<&mut Vec<f64>>;
}

/// Scale all gradients so their global L2 norm does not exceed `max_norm`.
pub fn clip_global_norm(tensors: &mut [&mut Vec<f64>], max_norm: f64) {
    let norm2: f64 = tensors
        .iter()
        .map(|t| t.iter().map(|g| g * g).sum::<f64>())
        .sum();
    let norm = norm2.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for t in tensors.iter_mut() {
            for g in t.iter_mut() {
                *g *= scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_derivatives_match_finite_differences() {
        let eps = 1e-7;
        for act in [
            Activation::Linear,
            Activation::Relu,
            Activation::Tanh,
            Activation::Sigmoid,
        ] {
            for &x in &[-1.3, -0.2, 0.4, 2.1] {
                let out = act.apply(x);
                let num = (act.apply(x + eps) - act.apply(x - eps)) / (2.0 * eps);
                assert!(
                    (act.derivative(x, out) - num).abs() < 1e-6,
                    "{act:?} at {x}"
                );
            }
        }
    }

    #[test]
    fn clipping_preserves_direction() {
        let mut a = vec![3.0, 0.0];
        let mut b = vec![0.0, 4.0];
        {
            let mut ts = vec![&mut a, &mut b];
            clip_global_norm(&mut ts, 2.5);
        }
        // norm was 5, scaled to 2.5
        assert!((a[0] - 1.5).abs() < 1e-12);
        assert!((b[1] - 2.0).abs() < 1e-12);
    }
}
