//! Annoyance-rating prediction: a six-block convolutional network over
//! log-mel spectrograms, with dataset handling, training, and inference.

mod config;
mod dataset;
mod predict;
mod train;

pub use config::{arp_layer_specs, build_arp, ArpConfig, DEFAULT_FILTER_COUNTS, MIN_INPUT_DIM};
pub use dataset::{read_manifest, DeltaDataset, DeltaRecord, OFFICIAL_SPLIT};
pub use predict::{predict_ar, predict_from_features, spectrogram_tensor, AnnoyanceRating};
pub use train::{train_arp, EpochMetrics, TrainOptions, TrainOutcome};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ArpError>;

#[derive(Debug, Error)]
pub enum ArpError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("manifest line {line}: {detail}")]
    Manifest { line: usize, detail: String },
    #[error("label {value} on manifest line {line} is outside [1, 10]")]
    LabelOutOfRange { line: usize, value: f64 },
    #[error("file {0:?} appears more than once in the manifest")]
    DuplicateFile(String),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error(
        "spectrogram {frames}x{mels} is too small for six pooling stages; \
         both dimensions must be at least {min}"
    )]
    SpectrogramTooSmall {
        frames: usize,
        mels: usize,
        min: usize,
    },
    #[error("clip {file:?} produced {got} frames, expected {expected} like the rest of the split")]
    FrameMismatch {
        expected: usize,
        got: usize,
        file: String,
    },
    #[error(transparent)]
    Dsp(#[from] audio_dsp::DspError),
    #[error(transparent)]
    Nn(#[from] nn_core::NnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
