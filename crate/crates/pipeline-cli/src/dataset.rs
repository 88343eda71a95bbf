//! Bridges study interaction tuples into the statistics crate's column
//! layout so the same rows feed both model training and regression.

use etv_model::InteractionTuple;
use stats::Dataset;

use crate::Result;

/// Columns the regression formulas expect, drawn from interaction tuples.
/// The emphasis column carries the double-voice level, which is how the
/// study operationalized emphasis.
pub fn tuples_to_dataset(tuples: &[InteractionTuple]) -> Result<Dataset> {
    let mut data = Dataset::new();
    data.add_categorical(
        "subject_id",
        tuples.iter().map(|t| t.subject_id.clone()).collect(),
    )?;
    data.add_categorical(
        "word_id",
        tuples.iter().map(|t| t.word_id.clone()).collect(),
    )?;
    let numeric: [(&str, fn(&InteractionTuple) -> f64); 11] = [
        ("volume", |t| t.voice.volume),
        ("pitch", |t| t.voice.pitch),
        ("emphasis", |t| t.voice.double_voice_level),
        ("speed", |t| t.voice.speed),
        ("ar", |t| t.env.annoyance),
        ("t30_s", |t| t.env.t30_s),
        ("distance_cm", |t| t.env.distance_cm),
        ("english_cefr", |t| t.profile.english_cefr),
        ("hearing_difficulty", |t| t.profile.hearing_difficulty),
        ("phonetic_similarity", |t| t.phonetic_similarity),
        ("ux", |t| t.ux),
    ];
    for (name, get) in numeric {
        data.add_numeric(name, tuples.iter().map(get).collect())?;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use etv_model::{CorpusConfig, generate_corpus};

    #[test]
    fn corpus_maps_onto_the_regression_columns() {
        let tuples = generate_corpus(&CorpusConfig {
            n_tuples: 40,
            n_subjects: 5,
            n_words: 8,
            seed: 11,
        })
        .unwrap();
        let data = tuples_to_dataset(&tuples).unwrap();
        assert_eq!(data.len(), 40);
        let emphasis = data.numeric("emphasis").unwrap();
        assert_eq!(emphasis[3], tuples[3].voice.double_voice_level);
        let ux = data.numeric("ux").unwrap();
        assert!(ux.iter().all(|v| (1.0..=10.0).contains(v)));
    }
}
