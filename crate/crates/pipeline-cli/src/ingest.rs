//! Validating ingestion of the three external data formats the pipeline
//! consumes: annoyance-labelled clip manifests, study interaction tuples,
//! and pronunciation lexicons. Bad files fail with the offending line.

use std::path::Path;

use serde::Serialize;

use crate::Result;

/// Which format to validate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IngestKind {
    DeltaManifest,
    StudyTuples,
    Lexicon,
}

impl IngestKind {
    pub const NAMES: [&'static str; 3] = ["delta-manifest", "study-tuples", "lexicon"];

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "delta-manifest" => Some(IngestKind::DeltaManifest),
            "study-tuples" => Some(IngestKind::StudyTuples),
            "lexicon" => Some(IngestKind::Lexicon),
            _ => None,
        }
    }
}

/// What a successful ingestion found.
#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub kind: IngestKind,
    pub path: String,
    /// Records for manifests and tuples, distinct words for lexicons.
    pub rows: usize,
    pub detail: String,
}

/// Parses and validates one file, returning row counts on success and a
/// line-numbered error on the first malformed record.
pub fn ingest(kind: IngestKind, path: &Path) -> Result<IngestSummary> {
    let detail;
    let rows;
    match kind {
        IngestKind::DeltaManifest => {
            let records = arp_model::read_manifest(path)?;
            rows = records.len();
            let (lo, hi) = records.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, r| {
                (acc.0.min(r.annoyance), acc.1.max(r.annoyance))
            });
            detail = format!("{rows} labelled clips, annoyance range [{lo}, {hi}]");
        }
        IngestKind::StudyTuples => {
            let tuples = etv_model::read_study_tuples(path)?;
            rows = tuples.len();
            let perfect = tuples
                .iter()
                .filter(|t| (t.phonetic_similarity - 1.0).abs() <= 1e-9)
                .count();
            detail = format!("{rows} interaction tuples, {perfect} with a perfect score");
        }
        IngestKind::Lexicon => {
            let lexicon = phonetics::Lexicon::from_file(path)?;
            rows = lexicon.words().count();
            detail = format!("{rows} words");
        }
    }
    Ok(IngestSummary {
        kind,
        path: path.display().to_string(),
        rows,
        detail,
    })
}
