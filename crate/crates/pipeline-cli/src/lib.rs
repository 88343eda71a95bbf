//! End-to-end speech-adaptation pipeline: ambient audio in, adapted voice
//! parameters out, plus the dataset plumbing and the paired-evaluation
//! harness used to compare fixed and adaptive voices.

mod adapt;
mod config;
mod dataset;
mod evaluate;
mod fixture;
mod ingest;

pub use adapt::{adapt, read_clip, AdaptationReport, ContextEcho, Pipeline, StageTimings};
pub use config::{PipelineConfig, EXAMPLE_TOML};
pub use dataset::tuples_to_dataset;
pub use evaluate::{
    run_evaluation, CellSummary, ConditionCells, EvaluationReport, StratumReport,
};
pub use fixture::{
    evaluation_fixture, ExpectedCells, FIXTURE_CELLS, FIXTURE_SUBJECTS, FIXTURE_WORDS,
};
pub use ingest::{ingest, IngestKind, IngestSummary};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration {path}: {detail}")]
    Config { path: String, detail: String },
    #[error("{what} not found: {path}")]
    MissingFile { what: &'static str, path: String },
    #[error("unknown room {name:?}; configured rooms: {available:?}")]
    UnknownRoom { name: String, available: Vec<String> },
    #[error("unpaired evaluation rows; missing in adaptive: {missing_in_adaptive:?}; missing in fixed: {missing_in_fixed:?}")]
    UnpairedRows {
        missing_in_adaptive: Vec<String>,
        missing_in_fixed: Vec<String>,
    },
    #[error("duplicate (subject, word) pair in the {condition} condition: {key}")]
    DuplicatePair { condition: &'static str, key: String },
    #[error("paired rows fall in different annoyance strata (the ambient sound is shared, so they must agree): {offenders:?}")]
    StratumMismatch { offenders: Vec<String> },
    #[error("the {stratum} stratum has no pairs; the evaluation needs both strata populated")]
    EmptyStratum { stratum: &'static str },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Arp(#[from] arp_model::ArpError),
    #[error(transparent)]
    Etv(#[from] etv_model::EtvError),
    #[error(transparent)]
    Dsp(#[from] audio_dsp::DspError),
    #[error(transparent)]
    Phonetics(#[from] phonetics::PhoneticsError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error(transparent)]
    Nn(#[from] nn_core::NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("writing output: {0}")]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// Short machine-readable tag for the error stream.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config { .. } => "config",
            PipelineError::MissingFile { .. } => "missing-file",
            PipelineError::UnknownRoom { .. } => "unknown-room",
            PipelineError::UnpairedRows { .. } => "unpaired-rows",
            PipelineError::DuplicatePair { .. } => "duplicate-pair",
            PipelineError::StratumMismatch { .. } => "stratum-mismatch",
            PipelineError::EmptyStratum { .. } => "empty-stratum",
            PipelineError::Validation(_) => "validation",
            PipelineError::Arp(_) => "arp",
            PipelineError::Etv(_) => "etv",
            PipelineError::Dsp(_) => "audio",
            PipelineError::Phonetics(_) => "phonetics",
            PipelineError::Stats(_) => "stats",
            PipelineError::Nn(_) => "model",
            PipelineError::Io(_) => "io",
            PipelineError::Json(_) => "output",
        }
    }

    /// Process exit code: 2 for problems in the user's inputs, 3 for
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. }
            | PipelineError::MissingFile { .. }
            | PipelineError::UnknownRoom { .. }
            | PipelineError::UnpairedRows { .. }
            | PipelineError::DuplicatePair { .. }
            | PipelineError::StratumMismatch { .. }
            | PipelineError::EmptyStratum { .. }
            | PipelineError::Validation(_)
            | PipelineError::Dsp(_)
            | PipelineError::Phonetics(_) => 2,
            PipelineError::Arp(e) => match e {
                arp_model::ArpError::Nn(_) => 3,
                _ => 2,
            },
            PipelineError::Etv(e) => match e {
                etv_model::EtvError::Nn(_) => 3,
                _ => 2,
            },
            PipelineError::Stats(e) => match e {
                stats::StatsError::SingularDesign
                | stats::StatsError::NonConvergence { .. } => 3,
                _ => 2,
            },
            PipelineError::Nn(_) | PipelineError::Io(_) | PipelineError::Json(_) => 3,
        }
    }
}
