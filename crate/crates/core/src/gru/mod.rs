//! Stacked GRU sequence classifier: batched forward pass, exact
//! backpropagation through time, Adam, a training loop and the GRUM model
//! file.

mod adam;
mod cell;
pub mod grum;
mod metrics;
mod model;
mod params;
mod train;

use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use cell::{gru_cell_forward, CellCache};
pub use metrics::{evaluate, ClassMetrics, Evaluation};
pub use model::{cross_entropy, ForwardCache, GruModel, ModelSpec, Normalization};
pub use params::{DenseLayer, GruLayerParams, Params};
pub use train::{train, EpochMetrics, TrainConfig, TrainHistory, WindowSet, WindowSource};

/// Floating-point element type of a model. `f32` for training and inference,
/// `f64` where gradients are checked numerically.
pub trait Real:
    Float + FromPrimitive + LinalgScalar + ScalarOperand + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + LinalgScalar + ScalarOperand + Debug + Display + Default + Send + Sync + 'static
{
}

#[derive(Debug, Error)]
pub enum GruError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("label {label} outside 0..{classes}")]
    BadLabel { label: usize, classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {0:?} has no training examples")]
    ClassMissing(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Format(#[from] crate::container::FormatError),
}

fn shape_err(expected: impl Display, found: impl Display) -> GruError {
    GruError::ShapeMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[inline]
fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("representable constant")
}
