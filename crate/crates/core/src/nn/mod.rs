//! A small hand-written neural-network engine.
//!
//! There is no autodiff graph: every layer pairs an explicit forward pass with
//! an explicit backward pass, and the models in [`crate::ser`] and
//! [`crate::recommender`] compose them by hand. All arithmetic is `f64` so
//! finite-difference checks have clean tolerances.

mod activation;
mod adam;
pub mod checkpoint;
mod conv;
mod dense;
mod embedding;
pub mod gradcheck;
mod linalg;
mod lstm;
mod pool;
pub mod rng;

pub use activation::{relu, relu_backward, softmax, softmax_cross_entropy};
pub use adam::{Adam, AdamConfig};
pub use conv::{conv2d_backward, conv2d_forward, Conv2d, Conv2dCache, ConvGrads};
pub use dense::{dense_backward, dense_forward, Dense, DenseGrads};
pub use embedding::{embedding_backward, embedding_lookup};
pub use gradcheck::{gradient_check, gradient_check_piecewise, GradCheckReport};
pub use lstm::{Lstm, LstmTrace};
pub use pool::{maxpool2d, maxpool2d_backward};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("max-pool needs even spatial dims, got {height}x{width}")]
    OddSpatialDim { height: usize, width: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("input sequence is empty")]
    EmptySequence,
    #[error("embedding index {index} out of range for vocabulary of {vocab} (OOV index is {vocab})")]
    IndexOutOfRange { index: usize, vocab: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

/// Dense row-major `f64` buffer with a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if shape.contains(&0) || expected != data.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite(format!("tensor of shape {shape:?}")));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub(crate) fn expect_shape(&self, shape: &[usize], what: &str) -> Result<(), NnError> {
        if self.shape != shape {
            return Err(NnError::ShapeMismatch(format!(
                "{what}: expected {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

/// A named trainable tensor and its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }
}

/// Anything holding trainable [`Param`]s, in a fixed order.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;

    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Multiplies every gradient by `factor` (e.g. `1 / batch_size`).
    fn scale_grads(&mut self, factor: f64) {
        for p in self.params_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }
}
