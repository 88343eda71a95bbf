//! Environment-to-voice model: a small MLP that maps interaction context
//! (annoyance, distance, listener profile, reverberation) to adapted voice
//! parameters, plus the study-tuple corpus handling it trains on.

mod corpus;
mod filter;
mod train;
mod types;

pub use corpus::{generate_corpus, read_study_tuples, write_study_tuples, CorpusConfig, STUDY_HEADER};
pub use filter::{augment, filter_training_set};
pub use train::{adapt_voice, train_etv, EtvConfig, EtvEpochMetrics, EtvModel, EtvOutcome};
pub use types::{
    EnvironmentContext, InteractionTuple, UserProfile, VoiceParameters, FEATURE_ORDER,
    OUTPUT_ORDER,
};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, EtvError>;

#[derive(Debug, Error)]
pub enum EtvError {
    #[error("invalid {field}: {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid {field}: {value} must be a whole number")]
    NotIntegral { field: &'static str, value: f64 },
    #[error("no admissible tuples: nothing passed the similarity = 1 and ux > 5 filter")]
    NoAdmissibleTuples,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("study-tuple file line {line}: {detail}")]
    StudyFile { line: u64, detail: String },
    #[error("weight file is not an environment-to-voice model: {0}")]
    BadWeights(String),
    #[error(transparent)]
    Nn(#[from] nn_core::NnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
