//! Dense one-class network: ReLU hidden layers with optional batch-norm and
//! dropout, a single logit output, binary cross-entropy loss, and Adam /
//! RMSProp updates. Gradients are derived by hand for this topology.

mod net;
mod optim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::ContainerError;

pub use net::{kaiming_init, ForwardCache, Gradients, Masks, Mode, OneClassNet, BN_EPS, BN_MOMENTUM};
pub use optim::{adam_step, rmsprop_step, OptimizerKind, OptimizerState};

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("forward cache does not belong to the current parameters")]
    StaleCache,
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

/// Architecture and learning hyper-parameters of one binary classifier.
/// `Default` is the reference one-class architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// Keep probability for input units.
    pub keep_input: f64,
    /// Keep probability for hidden units.
    pub keep_hidden: f64,
    pub batch_norm: bool,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 3,
            hidden_layers: vec![100],
            lr: 1e-4,
            optimizer: OptimizerKind::Adam,
            keep_input: 0.8,
            keep_hidden: 0.5,
            batch_norm: true,
            l2_lambda: 1e-4,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn with_input_dim(input_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: String| Err(NeuralError::InvalidConfig(m));
        if self.input_dim == 0 {
            return bad("input_dim must be at least 1".into());
        }
        if self.hidden_layers.contains(&0) {
            return bad(format!("hidden widths must be >= 1, got {:?}", self.hidden_layers));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        for (name, k) in [("keep_input", self.keep_input), ("keep_hidden", self.keep_hidden)] {
            if !(k > 0.0 && k <= 1.0) {
                return bad(format!("{name} must be in (0, 1], got {k}"));
            }
        }
        if !(self.l2_lambda >= 0.0) {
            return bad(format!("l2_lambda must be >= 0, got {}", self.l2_lambda));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        Ok(())
    }
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Subgradient of ReLU; 0 at the kink.
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit, `max(z,0) - z*y + ln(1 + e^-|z|)`.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}
