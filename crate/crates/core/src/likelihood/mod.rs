//! Per-block seizure likelihood: a 1D CNN evaluated from a portable weight
//! file, or probabilities computed elsewhere and loaded from CSV.

mod arch;
mod model;
mod probs;
mod weights;

pub use arch::{conv_output_len, Activation, CnnArchitecture, Layer, PoolKind, Shape};
pub use model::{LayerParams, Model};
pub use probs::{
    align, evidence_from_probability, load_probabilities, read_probability_csv,
    write_probabilities, ProbabilityRow, ProbabilitySeries, EVIDENCE_EPS,
};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights};

use thiserror::Error;

use crate::preprocess::EegBlock;

#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error("{}shape mismatch: {detail}", layer.map(|i| format!("layer {i}: ")).unwrap_or_default())]
    Shape {
        layer: Option<usize>,
        detail: String,
    },
    #[error("weight file checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("layer {index}: unknown layer kind {kind}")]
    UnknownLayer { index: usize, kind: u8 },
    #[error("weight file: {0}")]
    Format(String),
    #[error("row {row}: probability {value} is outside [0, 1]")]
    Range { row: usize, value: f64 },
    #[error("no probability for block {0}")]
    Missing(String),
    #[error("block {0} has more than one probability")]
    Duplicate(String),
    #[error("probability for block {0}, which is not in the manifest")]
    Unexpected(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Seizure probability of one block.
pub fn forward(block: &EegBlock, model: &Model) -> Result<f32, LikelihoodError> {
    model.forward(&block.samples)
}
