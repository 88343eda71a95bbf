//! Synthetic study corpus and the CSV schema for interaction tuples.
//!
//! The generator reproduces the structure of the interaction study: voice
//! parameters and environments are sampled independently, and the two
//! outcomes (phonetic similarity, experience rating) are gamma draws around
//! log-linear predictors. Similarity saturates at 1.0, which is what makes
//! outcome filtering meaningful, and both outcomes share the documented
//! effect directions: annoyance, reverberation, pitch, and speed hurt;
//! volume helps in reverberant rooms (positive volume-by-reverberation
//! interaction); volume alone hurts the experience rating.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::types::{EnvironmentContext, InteractionTuple, UserProfile, VoiceParameters};
use crate::{EtvError, Result};

/// Column order for study-tuple CSV files. `emphasis` is the double-voice
/// level of the synthesizer.
pub const STUDY_HEADER: [&str; 13] = [
    "subject_id",
    "word_id",
    "volume",
    "pitch",
    "emphasis",
    "speed",
    "ar",
    "t30_s",
    "distance_cm",
    "english_cefr",
    "hearing_difficulty",
    "phonetic_similarity",
    "ux",
];

/// Shape of the synthetic corpus. Defaults match the study scale: 5442
/// tuples from 27 participants.
#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub n_tuples: usize,
    pub n_subjects: usize,
    pub n_words: usize,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_tuples: 5442,
            n_subjects: 27,
            n_words: 40,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    fn validate(&self) -> Result<()> {
        if self.n_tuples == 0 || self.n_subjects == 0 || self.n_words == 0 {
            return Err(EtvError::Config(format!(
                "corpus needs at least one tuple, subject, and word (got {}, {}, {})",
                self.n_tuples, self.n_subjects, self.n_words
            )));
        }
        Ok(())
    }
}

// Log-scale linear predictor for phonetic similarity. The gamma draw around
// exp(eta) is censored at 1.0, so favourable conditions produce a point mass
// of perfect scores.
fn similarity_eta(v: &VoiceParameters, env: &EnvironmentContext, p: &UserProfile) -> f64 {
    0.62 - 0.055 * env.annoyance - 1.0 * env.t30_s - 0.25 * v.pitch - 0.08 * v.speed
        + 0.9 * v.volume * env.t30_s
        - 0.0002 * env.distance_cm
        - 0.01 * v.double_voice_level
        - 0.008 * p.hearing_difficulty
        + 0.008 * p.english_cefr
}

// Log-scale linear predictor for the experience rating (1..10 scale).
fn experience_eta(v: &VoiceParameters, env: &EnvironmentContext, p: &UserProfile) -> f64 {
    2.84 - 0.05 * env.annoyance - 0.20 * v.pitch - 0.0008 * env.distance_cm
        - 0.8 * env.t30_s
        - 0.06 * p.english_cefr
        - 0.07 * v.speed
        - 0.25 * v.volume
        + 0.85 * v.volume * env.t30_s
        - 0.005 * v.double_voice_level
        + 0.01 * p.hearing_difficulty
}

const SIMILARITY_SHAPE: f64 = 30.0;
const EXPERIENCE_SHAPE: f64 = 35.0;

/// Generates a deterministic synthetic corpus of interaction tuples.
pub fn generate_corpus(config: &CorpusConfig) -> Result<Vec<InteractionTuple>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    struct Subject {
        id: String,
        profile: UserProfile,
        u_sp: f64,
        u_ux: f64,
    }
    let subjects: Vec<Subject> = (0..config.n_subjects)
        .map(|i| Subject {
            id: format!("s{:02}", i + 1),
            profile: UserProfile::new(
                rng.gen_range(1..=5) as f64,
                rng.gen_range(1..=6) as f64,
            )
            .expect("integral profile in range"),
            u_sp: 0.03 * unit.sample(&mut rng),
            u_ux: 0.08 * unit.sample(&mut rng),
        })
        .collect();
    struct Word {
        id: String,
        u_sp: f64,
        u_ux: f64,
    }
    let words: Vec<Word> = (0..config.n_words)
        .map(|i| Word {
            id: format!("w{:02}", i + 1),
            u_sp: 0.03 * unit.sample(&mut rng),
            u_ux: 0.05 * unit.sample(&mut rng),
        })
        .collect();

    let mut tuples = Vec::with_capacity(config.n_tuples);
    for i in 0..config.n_tuples {
        let subject = &subjects[i % config.n_subjects];
        let word = &words[rng.gen_range(0..config.n_words)];
        let voice = VoiceParameters {
            volume: rng.gen_range(VoiceParameters::VOLUME_RANGE.0..=VoiceParameters::VOLUME_RANGE.1),
            pitch: rng.gen_range(VoiceParameters::PITCH_RANGE.0..=VoiceParameters::PITCH_RANGE.1),
            speed: rng.gen_range(VoiceParameters::SPEED_RANGE.0..=VoiceParameters::SPEED_RANGE.1),
            double_voice_level: rng
                .gen_range(VoiceParameters::DOUBLE_VOICE_RANGE.0..=VoiceParameters::DOUBLE_VOICE_RANGE.1),
        };
        let env = EnvironmentContext::new(
            rng.gen_range(1.0..=10.0),
            rng.gen_range(60.0..=500.0),
            rng.gen_range(0.04..=0.78),
        )
        .expect("generated context in range");

        let eta_sp = similarity_eta(&voice, &env, &subject.profile) + subject.u_sp + word.u_sp;
        let mean_sp = eta_sp.exp();
        let draw_sp = Gamma::new(SIMILARITY_SHAPE, mean_sp / SIMILARITY_SHAPE)
            .expect("positive gamma parameters")
            .sample(&mut rng);
        let similarity = draw_sp.min(1.0);

        let eta_ux = experience_eta(&voice, &env, &subject.profile) + subject.u_ux + word.u_ux;
        let mean_ux = eta_ux.exp();
        let draw_ux = Gamma::new(EXPERIENCE_SHAPE, mean_ux / EXPERIENCE_SHAPE)
            .expect("positive gamma parameters")
            .sample(&mut rng);
        let ux = draw_ux.clamp(1.0, 10.0);

        tuples.push(InteractionTuple {
            subject_id: subject.id.clone(),
            word_id: word.id.clone(),
            voice,
            env,
            profile: subject.profile,
            phonetic_similarity: similarity,
            ux,
        });
    }
    Ok(tuples)
}

/// Writes tuples as CSV with the [`STUDY_HEADER`] schema. Floats are written
/// with shortest round-trip precision, so reading the file back recovers the
/// exact values.
pub fn write_study_tuples(path: &Path, tuples: &[InteractionTuple]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(STUDY_HEADER)?;
    for t in tuples {
        writer.write_record([
            t.subject_id.as_str(),
            t.word_id.as_str(),
            &t.voice.volume.to_string(),
            &t.voice.pitch.to_string(),
            &t.voice.double_voice_level.to_string(),
            &t.voice.speed.to_string(),
            &t.env.annoyance.to_string(),
            &t.env.t30_s.to_string(),
            &t.env.distance_cm.to_string(),
            &t.profile.english_cefr.to_string(),
            &t.profile.hearing_difficulty.to_string(),
            &t.phonetic_similarity.to_string(),
            &t.ux.to_string(),
        ])?;
    }
    writer.flush().map_err(std::io::Error::from)?;
    Ok(())
}

/// Reads a study-tuple CSV. The header must match [`STUDY_HEADER`] exactly
/// (order included): a renamed, missing, reordered, or extra column is
/// rejected rather than guessed at. Every row is validated on ingest and
/// errors carry the 1-based line number.
pub fn read_study_tuples(path: &Path) -> Result<Vec<InteractionTuple>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(STUDY_HEADER) {
        let got: Vec<&str> = headers.iter().collect();
        return Err(EtvError::StudyFile {
            line: 1,
            detail: format!(
                "header must be exactly {:?}, got {:?}",
                STUDY_HEADER, got
            ),
        });
    }

    let mut tuples = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != STUDY_HEADER.len() {
            return Err(EtvError::StudyFile {
                line,
                detail: format!("expected {} fields, got {}", STUDY_HEADER.len(), row.len()),
            });
        }
        let text = |idx: usize| -> Result<String> {
            let value = row.get(idx).unwrap_or("");
            if value.is_empty() {
                return Err(EtvError::StudyFile {
                    line,
                    detail: format!("column {:?} is empty", STUDY_HEADER[idx]),
                });
            }
            Ok(value.to_string())
        };
        let number = |idx: usize| -> Result<f64> {
            let value = text(idx)?;
            value.parse::<f64>().map_err(|_| EtvError::StudyFile {
                line,
                detail: format!("column {:?} is not a number: {value:?}", STUDY_HEADER[idx]),
            })
        };
        let domain = |e: EtvError| EtvError::StudyFile {
            line,
            detail: e.to_string(),
        };

        let subject_id = text(0)?;
        let word_id = text(1)?;
        let voice =
            VoiceParameters::new(number(2)?, number(3)?, number(5)?, number(4)?).map_err(domain)?;
        let env = EnvironmentContext::new(number(6)?, number(8)?, number(7)?).map_err(domain)?;
        let profile = UserProfile::new_integral(number(10)?, number(9)?).map_err(domain)?;
        let tuple = InteractionTuple {
            subject_id,
            word_id,
            voice,
            env,
            profile,
            phonetic_similarity: number(11)?,
            ux: number(12)?,
        };
        tuple.validate().map_err(domain)?;
        tuples.push(tuple);
    }
    Ok(tuples)
}
