//! Convolutional classifier written from scratch.
//!
//! The network takes a depth crop (channel A) and a gripper segment image
//! (channel B) of the same size. Each channel runs through its own two
//! convolution stages; the results are concatenated along channels and pass
//! through two shared convolution stages, two dropout-regularized hidden FC
//! layers, and a 2-way softmax whose first output is the predicted success
//! rate `y0`.
//!
//! Everything is generic over [`Scalar`] so gradient checks can run in f64
//! while training runs in f32.

mod io;
mod net;
mod ops;
mod scalar;
mod train;

pub use io::{fingerprint, load_params, read_params, save_params, write_params};
pub use net::{Gradients, LayerSpec, NetConfig, Network, StageSpec};
pub use ops::{
    conv2d_backward, conv2d_forward, cross_entropy, dropout_mask, fc_backward, fc_forward, maxpool2_backward, maxpool2_forward,
    relu, relu_backward, softmax,
};
pub use scalar::Scalar;
pub use train::{evaluate, train, EpochStats, Sample, SampleSource, TrainConfig, TrainReport, VecSource};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
    #[error("parameter file format error: {0}")]
    Format(String),
    #[error("parameter file was written for a different architecture")]
    Fingerprint,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Row-major dense tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::ZERO; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NnError::Shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Debug builds check every op result for NaN and infinity.
    pub(crate) fn debug_check(&self, op: &str) {
        debug_assert!(self.data.iter().all(|v| v.is_finite()), "{op} produced a non-finite value");
    }
}
