//! Dense tensor storage and the multilinear operations used by the
//! decomposition, completion, and model-based RL crates in this workspace.
//!
//! The two central types are [`DenseTensor`], a row-major n-dimensional real
//! array, and [`CPForm`], a weighted sum of unit-norm rank-1 outer products.

mod cp;
mod dense;
pub mod io;

pub use cp::CPForm;
pub use dense::{DenseTensor, ModeArg};

use thiserror::Error;

/// Errors raised by tensor construction and multilinear operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("data length {len} does not match shape {shape:?} (expected {expected})")]
    DataLength {
        len: usize,
        shape: Vec<usize>,
        expected: usize,
    },
    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch { a: Vec<usize>, b: Vec<usize> },
    #[error("tensor has {order} modes but {got} mode arguments were given")]
    ModeCount { order: usize, got: usize },
    #[error("vector of length {len} does not match mode {mode} of size {dim}")]
    VectorLength { mode: usize, len: usize, dim: usize },
    #[error("zero dimension in shape {shape:?}")]
    ZeroDimension { shape: Vec<usize> },
    #[error("non-finite entry at flat index {index}")]
    NonFinite { index: usize },
    #[error("factor vector (mode {mode}, component {component}) has norm {norm}, expected 1")]
    NotUnitNorm {
        mode: usize,
        component: usize,
        norm: f64,
    },
    #[error("component {component} has {got} factor vectors, expected {order}")]
    FactorCount {
        component: usize,
        order: usize,
        got: usize,
    },
    #[error("truncation rank {requested} exceeds decomposition rank {rank}")]
    TruncateRank { requested: usize, rank: usize },
    #[error("index {index:?} out of bounds for shape {shape:?}")]
    IndexOutOfBounds { index: Vec<usize>, shape: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Tolerance used when validating that CP factor vectors have unit norm.
pub const UNIT_NORM_TOL: f64 = 1e-9;
