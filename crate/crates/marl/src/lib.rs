//! Multi-agent tabular MDPs with low-rank structure: environment and exact
//! planning, synthetic MDP generators, the three model-based agents
//! (no-decomposition baseline, full state-action CP, per-state Tesseract
//! style), and the experiment harness that trains and tracks them.

pub mod agents;
pub mod gen;
pub mod harness;
pub mod mdp;
pub mod mdp_io;
pub mod seeds;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarlError {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("transition slice (state {state}, joint action {action}) sums to {sum}, expected 1")]
    SliceNotNormalized { state: usize, action: usize, sum: f64 },
    #[error(
        "transition entry (state {state}, joint action {action}, next {next}) is {value} < 0"
    )]
    NegativeProbability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    #[error("discount {0} outside (0, 1)")]
    BadDiscount(f64),
    #[error("policy action {action} out of range for state {state} ({joint_actions} joint actions)")]
    PolicyOutOfRange {
        state: usize,
        action: usize,
        joint_actions: usize,
    },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("policy evaluation residual {residual} exceeds tolerance")]
    EvaluationResidual { residual: f64 },
    #[error("transition generation did not converge: residual {residual} after {iterations} iterations")]
    NormalizeLoopDiverged { residual: f64, iterations: usize },
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
    #[error(transparent)]
    Decomp(#[from] cp_decomp::DecompError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, MarlError>;
