//! CP decomposition and completion of dense tensors.
//!
//! The decomposition pipeline extracts one rank-1 component at a time with
//! asymmetric power updates, deflating the residual after each component,
//! then polishes all components jointly with alternating minimization. The
//! completion solver runs the same alternating scheme against a binary
//! observation mask, dividing out per-coordinate mask weights.

mod altmin;
mod complete;
mod power;

pub use altmin::{alternating_minimization, alternating_minimization_traced};
pub use complete::{complete, complete_traced, ObservationMask};
pub use power::power_iteration_deflation;

use tensor_core::{CPForm, DenseTensor, TensorError};
use thiserror::Error;

/// Entrywise-division guard: mask contractions below this threshold leave
/// the corresponding coordinate (or weight) unchanged.
pub const DENOM_GUARD: f64 = 1e-12;

/// How many fresh random initializations a power-iteration component may
/// consume after a zero contraction before the tensor is declared degenerate.
pub const ZERO_CONTRACTION_RETRIES: usize = 5;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("degenerate tensor: power update contracted to a zero vector after {retries} restarts")]
    DegenerateTensor { retries: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("observation mask entry at flat index {index} is {value}, expected 0 or 1")]
    MaskNotBinary { index: usize, value: f64 },
    #[error("observation mask has no observed entries")]
    EmptyMask,
    #[error("cannot decompose an order-0 tensor")]
    ScalarTensor,
}

pub type Result<T> = std::result::Result<T, DecompError>;

/// Configuration for decomposition and completion runs.
#[derive(Debug, Clone)]
pub struct DecompConfig {
    /// Number of rank-1 components to extract.
    pub rank: usize,
    /// Power-update stopping threshold on the summed squared change of the
    /// factor vectors between successive iterations.
    pub power_tolerance: f64,
    /// Iteration cap per power-iteration component.
    pub power_max_iters: usize,
    /// Sweep cap for alternating minimization.
    pub altmin_max_sweeps: usize,
    /// Stop when the relative objective improvement of a sweep falls below
    /// this threshold.
    pub altmin_tolerance: f64,
    /// RNG seed for factor initialization.
    pub seed: u64,
}

impl Default for DecompConfig {
    fn default() -> Self {
        Self {
            rank: 1,
            power_tolerance: 1e-9,
            power_max_iters: 500,
            altmin_max_sweeps: 200,
            altmin_tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl DecompConfig {
    pub fn with_rank(mut self, rank: usize) -> Self {
        self.rank = rank;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(DecompError::InvalidConfig("rank must be >= 1".into()));
        }
        if !(self.power_tolerance > 0.0) || !(self.altmin_tolerance > 0.0) {
            return Err(DecompError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if self.power_max_iters == 0 || self.altmin_max_sweeps == 0 {
            return Err(DecompError::InvalidConfig(
                "iteration caps must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Full decomposition: power iteration with deflation for initialization,
/// then alternating minimization at the same rank.
pub fn decompose(t: &DenseTensor, cfg: &DecompConfig) -> Result<CPForm> {
    let init = power_iteration_deflation(t, cfg)?;
    alternating_minimization(t, &init, cfg)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
