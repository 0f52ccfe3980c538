//! Exact sum-product inference on a first-order binary hidden Markov chain.
//!
//! The chain factorizes as `P(s, y) = prod_i P(s_i | s_{i-1}) P(y_i | s_i)`.
//! Forward messages `alpha_i(s)` and backward messages `beta_i(s)` are kept
//! normalized to sum to one, with the logarithms of the normalizers
//! accumulated alongside, so arbitrarily long chains neither underflow nor
//! overflow. The marginal of block `k` is `alpha_k * beta_k`, renormalized.

mod chain;
mod messages;
mod streaming;

pub use chain::{DetectorConfig, Evidence, TransitionModel, DEFAULT_P01, DEFAULT_P10};
pub use messages::{
    backward_messages, detect, fg_flop_count, forward_messages, smooth, smooth_evidence,
    MarginalSeries, MessageVector, FG_FLOPS_PER_BLOCK,
};
pub use streaming::FixedLagSmoother;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("evidence at block {index} is degenerate: {detail}")]
    DegenerateEvidence { index: usize, detail: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty evidence sequence")]
    Empty,
    #[error("domain error: {0}")]
    Domain(String),
}
