//! Phonetic similarity between spoken target words and typed responses:
//! dictionary-based phoneme conversion (homophone-aware, with a rule-based
//! fallback for unknown words) and feature-weighted global alignment
//! producing a score in [0, 1].

mod align;
mod inventory;
mod lexicon;

pub use align::{
    align, similarity, similarity_with, AlignmentStep, SimilarityScore, INDEL_COST,
};
pub use inventory::{phoneme_distance, Features, Manner, Phoneme, PhonemeSequence};
pub use lexicon::{Lexicon, Pronunciations};

#[derive(Debug, thiserror::Error)]
pub enum PhoneticsError {
    #[error("unknown phoneme symbol {0:?}")]
    UnknownPhoneme(String),
    #[error("phoneme sequence is empty")]
    EmptySequence,
    #[error("cannot convert word {word:?}: {detail}")]
    InvalidWord { word: String, detail: String },
    #[error("dictionary line {line}: {detail}")]
    LexiconFormat { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PhoneticsError>;
