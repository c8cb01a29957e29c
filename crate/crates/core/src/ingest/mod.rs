//! Telemetry and frame ingestion, preprocessing, and the synthetic
//! stand-in datasets.

mod frame;
mod synth;
mod telemetry;

pub use frame::{load_frame_pgm, parse_pgm, write_pgm, Frame, Label, LabeledFrames};
pub use synth::{
    synth_crater_dataset, synth_gnc_dataset, synth_gnc_with_truth, GroundTruth, SyntheticGnc,
};
pub use telemetry::{
    load_telemetry_csv, parse_telemetry_csv, split, standardize, Dataset, ScalerParams,
    DEFAULT_TEST_FRACTION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("malformed number at line {line}, column `{column}`: {value:?}")]
    MalformedNumber {
        line: u64,
        column: String,
        value: String,
    },
    #[error("dataset is empty or too small for this operation")]
    EmptyDataset,
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("bad magic number (expected binary P5)")]
    BadMagic,
    #[error("unsupported maxval {0} (expected 255)")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    TruncatedPixelData { expected: usize, found: usize },
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
