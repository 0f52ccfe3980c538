//! Line-noise removal, trimming around seizures, and segmentation into
//! labelled 4-second blocks.

mod blocks;
mod notch;
mod tensor;

pub use blocks::{
    block_count, label_block, segment, trim_around_seizures, BlockSequence, EegBlock,
    TrimmedSegment, BLOCK_CHANNELS, BLOCK_LEN, BLOCK_RATE, STRIDE_S, WINDOW_S,
};
pub use notch::{notch_filter, notch_recording, Biquad, FilterSpec};
pub use tensor::{
    read_manifest, write_manifest, BlockKey, BlockTensorReader, BlockTensorWriter, ManifestRow,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("filter configuration: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid annotation: {0}")]
    Validation(String),
    #[error("block file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
