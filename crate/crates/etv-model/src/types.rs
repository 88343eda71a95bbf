//! Domain types for the interaction corpus: voice parameters, listener
//! profile, environment context, and the study tuple binding them together.

use serde::{Deserialize, Serialize};

use crate::{EtvError, Result};

/// Model input features, in the order the network consumes them. The order
/// is also written into the weight file so that a permuted caller fails
/// loudly instead of silently.
pub const FEATURE_ORDER: [&str; 5] = [
    "ar",
    "distance_cm",
    "english_cefr",
    "hearing_difficulty",
    "t30_s",
];

/// Model output dimensions, in network order.
pub const OUTPUT_ORDER: [&str; 4] = ["volume", "pitch", "emphasis", "speed"];

/// Synthesizer settings for one utterance. `double_voice_level` is the
/// layered-voice emphasis effect (the `emphasis` column in study files).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoiceParameters {
    pub volume: f64,
    pub pitch: f64,
    pub speed: f64,
    pub double_voice_level: f64,
}

impl Default for VoiceParameters {
    fn default() -> Self {
        VoiceParameters {
            volume: 1.0,
            pitch: 1.0,
            speed: 1.0,
            double_voice_level: 0.0,
        }
    }
}

impl VoiceParameters {
    pub const VOLUME_RANGE: (f64, f64) = (0.0, 2.0);
    pub const PITCH_RANGE: (f64, f64) = (0.5, 2.0);
    pub const SPEED_RANGE: (f64, f64) = (0.4, 4.0);
    pub const DOUBLE_VOICE_RANGE: (f64, f64) = (0.0, 4.0);

    pub fn new(volume: f64, pitch: f64, speed: f64, double_voice_level: f64) -> Result<Self> {
        let p = VoiceParameters {
            volume,
            pitch,
            speed,
            double_voice_level,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("volume", self.volume, Self::VOLUME_RANGE)?;
        check_range("pitch", self.pitch, Self::PITCH_RANGE)?;
        check_range("speed", self.speed, Self::SPEED_RANGE)?;
        check_range(
            "double_voice_level",
            self.double_voice_level,
            Self::DOUBLE_VOICE_RANGE,
        )?;
        Ok(())
    }

    /// Clamps every dimension into its closed range.
    pub fn clamped(volume: f64, pitch: f64, speed: f64, double_voice_level: f64) -> Self {
        VoiceParameters {
            volume: volume.clamp(Self::VOLUME_RANGE.0, Self::VOLUME_RANGE.1),
            pitch: pitch.clamp(Self::PITCH_RANGE.0, Self::PITCH_RANGE.1),
            speed: speed.clamp(Self::SPEED_RANGE.0, Self::SPEED_RANGE.1),
            double_voice_level: double_voice_level
                .clamp(Self::DOUBLE_VOICE_RANGE.0, Self::DOUBLE_VOICE_RANGE.1),
        }
    }

    /// Values in [`OUTPUT_ORDER`].
    pub fn as_array(&self) -> [f64; 4] {
        [self.volume, self.pitch, self.double_voice_level, self.speed]
    }

    /// Inverse of [`VoiceParameters::as_array`], clamping into range.
    pub fn from_array_clamped(values: [f64; 4]) -> Self {
        VoiceParameters::clamped(values[0], values[1], values[3], values[2])
    }

    /// Per-dimension (lo, hi) bounds in [`OUTPUT_ORDER`].
    pub fn ranges() -> [(f64, f64); 4] {
        [
            Self::VOLUME_RANGE,
            Self::PITCH_RANGE,
            Self::DOUBLE_VOICE_RANGE,
            Self::SPEED_RANGE,
        ]
    }
}

/// Listener traits gathered once per participant. Stored as reals so that
/// augmentation jitter stays representable; file ingestion additionally
/// requires whole numbers (the questionnaire scales are discrete).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    /// Self-reported difficulty hearing in noise, 1 (never) to 5 (always).
    pub hearing_difficulty: f64,
    /// English proficiency band, 1 (A1) to 6 (C2).
    pub english_cefr: f64,
}

impl UserProfile {
    pub const HEARING_RANGE: (f64, f64) = (1.0, 5.0);
    pub const CEFR_RANGE: (f64, f64) = (1.0, 6.0);

    pub fn new(hearing_difficulty: f64, english_cefr: f64) -> Result<Self> {
        check_range("hearing_difficulty", hearing_difficulty, Self::HEARING_RANGE)?;
        check_range("english_cefr", english_cefr, Self::CEFR_RANGE)?;
        Ok(UserProfile {
            hearing_difficulty,
            english_cefr,
        })
    }

    /// Questionnaire-style validation: in range and integral.
    pub fn new_integral(hearing_difficulty: f64, english_cefr: f64) -> Result<Self> {
        let p = UserProfile::new(hearing_difficulty, english_cefr)?;
        if p.hearing_difficulty.fract() != 0.0 {
            return Err(EtvError::NotIntegral {
                field: "hearing_difficulty",
                value: p.hearing_difficulty,
            });
        }
        if p.english_cefr.fract() != 0.0 {
            return Err(EtvError::NotIntegral {
                field: "english_cefr",
                value: p.english_cefr,
            });
        }
        Ok(p)
    }
}

/// What the robot knows about the scene before speaking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentContext {
    /// Predicted annoyance rating of the ambient sound, 1 to 10.
    pub annoyance: f64,
    /// Listener distance. The studied range is [60, 500] cm; outside it the
    /// context must be constructed with [`EnvironmentContext::extrapolated`].
    pub distance_cm: f64,
    /// Reverberation time of the room in seconds.
    pub t30_s: f64,
    /// True when `distance_cm` lies outside the studied range.
    pub extrapolation: bool,
}

impl EnvironmentContext {
    pub const ANNOYANCE_RANGE: (f64, f64) = (1.0, 10.0);
    pub const DISTANCE_RANGE: (f64, f64) = (60.0, 500.0);

    pub fn new(annoyance: f64, distance_cm: f64, t30_s: f64) -> Result<Self> {
        check_range("annoyance", annoyance, Self::ANNOYANCE_RANGE)?;
        check_range("distance_cm", distance_cm, Self::DISTANCE_RANGE)?;
        check_positive("t30_s", t30_s)?;
        Ok(EnvironmentContext {
            annoyance,
            distance_cm,
            t30_s,
            extrapolation: false,
        })
    }

    /// Builds a context whose distance is outside the studied range,
    /// flagging it so downstream consumers can surface the caveat.
    pub fn extrapolated(annoyance: f64, distance_cm: f64, t30_s: f64) -> Result<Self> {
        check_range("annoyance", annoyance, Self::ANNOYANCE_RANGE)?;
        if !distance_cm.is_finite() || distance_cm <= 0.0 {
            return Err(EtvError::OutOfRange {
                field: "distance_cm",
                value: distance_cm,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        check_positive("t30_s", t30_s)?;
        let in_range =
            (Self::DISTANCE_RANGE.0..=Self::DISTANCE_RANGE.1).contains(&distance_cm);
        Ok(EnvironmentContext {
            annoyance,
            distance_cm,
            t30_s,
            extrapolation: !in_range,
        })
    }
}

/// One spoken word in the study: who heard it, how it was spoken, where,
/// and what came of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTuple {
    pub subject_id: String,
    pub word_id: String,
    pub voice: VoiceParameters,
    pub env: EnvironmentContext,
    pub profile: UserProfile,
    /// Phonetic similarity between the spoken word and the typed response.
    pub phonetic_similarity: f64,
    /// Self-reported pleasantness of the utterance, 1 to 10.
    pub ux: f64,
}

impl InteractionTuple {
    pub fn validate(&self) -> Result<()> {
        self.voice.validate()?;
        check_range(
            "annoyance",
            self.env.annoyance,
            EnvironmentContext::ANNOYANCE_RANGE,
        )?;
        if !self.env.extrapolation {
            check_range(
                "distance_cm",
                self.env.distance_cm,
                EnvironmentContext::DISTANCE_RANGE,
            )?;
        }
        check_positive("t30_s", self.env.t30_s)?;
        check_range(
            "hearing_difficulty",
            self.profile.hearing_difficulty,
            UserProfile::HEARING_RANGE,
        )?;
        check_range("english_cefr", self.profile.english_cefr, UserProfile::CEFR_RANGE)?;
        check_range("phonetic_similarity", self.phonetic_similarity, (0.0, 1.0))?;
        check_range("ux", self.ux, (1.0, 10.0))?;
        Ok(())
    }

    /// Input features in [`FEATURE_ORDER`].
    pub fn features(&self) -> [f64; 5] {
        [
            self.env.annoyance,
            self.env.distance_cm,
            self.profile.english_cefr,
            self.profile.hearing_difficulty,
            self.env.t30_s,
        ]
    }

    /// Regression targets in [`OUTPUT_ORDER`].
    pub fn targets(&self) -> [f64; 4] {
        self.voice.as_array()
    }
}

fn check_range(field: &'static str, value: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(EtvError::OutOfRange {
            field,
            value,
            lo,
            hi,
        });
    }
    Ok(())
}

fn check_positive(field: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(EtvError::OutOfRange {
            field,
            value,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_neutral_and_valid() {
        let v = VoiceParameters::default();
        assert_eq!((v.volume, v.pitch, v.speed, v.double_voice_level), (1.0, 1.0, 1.0, 0.0));
        v.validate().unwrap();
    }

    #[test]
    fn out_of_range_voice_is_rejected() {
        assert!(VoiceParameters::new(2.1, 1.0, 1.0, 0.0).is_err());
        assert!(VoiceParameters::new(1.0, 0.4, 1.0, 0.0).is_err());
        assert!(VoiceParameters::new(1.0, 1.0, 4.2, 0.0).is_err());
        assert!(VoiceParameters::new(1.0, 1.0, 1.0, -0.1).is_err());
        assert!(VoiceParameters::new(0.0, 0.5, 0.4, 4.0).is_ok());
    }

    #[test]
    fn clamping_lands_on_the_bounds() {
        let v = VoiceParameters::clamped(9.0, 0.0, 9.0, -3.0);
        assert_eq!(v.volume, 2.0);
        assert_eq!(v.pitch, 0.5);
        assert_eq!(v.speed, 4.0);
        assert_eq!(v.double_voice_level, 0.0);
    }

    #[test]
    fn array_round_trip_follows_output_order() {
        let v = VoiceParameters::new(1.5, 0.8, 2.5, 3.0).unwrap();
        let arr = v.as_array();
        assert_eq!(arr, [1.5, 0.8, 3.0, 2.5]);
        assert_eq!(VoiceParameters::from_array_clamped(arr), v);
    }

    #[test]
    fn profile_ingestion_requires_integers_but_storage_does_not() {
        assert!(UserProfile::new_integral(2.0, 5.0).is_ok());
        assert!(matches!(
            UserProfile::new_integral(2.5, 5.0),
            Err(EtvError::NotIntegral { field: "hearing_difficulty", .. })
        ));
        assert!(UserProfile::new(2.5, 5.0).is_ok());
        assert!(UserProfile::new(0.5, 5.0).is_err());
        assert!(UserProfile::new(2.0, 6.5).is_err());
    }

    #[test]
    fn distance_outside_the_studied_range_needs_the_flag() {
        assert!(EnvironmentContext::new(5.0, 550.0, 0.4).is_err());
        let ctx = EnvironmentContext::extrapolated(5.0, 550.0, 0.4).unwrap();
        assert!(ctx.extrapolation);
        let ctx = EnvironmentContext::extrapolated(5.0, 300.0, 0.4).unwrap();
        assert!(!ctx.extrapolation);
        assert!(EnvironmentContext::new(5.0, 300.0, 0.0).is_err());
        assert!(EnvironmentContext::new(0.5, 300.0, 0.4).is_err());
    }

    #[test]
    fn feature_vector_matches_the_documented_order() {
        let t = InteractionTuple {
            subject_id: "s1".into(),
            word_id: "w1".into(),
            voice: VoiceParameters::default(),
            env: EnvironmentContext::new(7.0, 120.0, 0.3).unwrap(),
            profile: UserProfile::new(2.0, 4.0).unwrap(),
            phonetic_similarity: 1.0,
            ux: 8.0,
        };
        t.validate().unwrap();
        assert_eq!(t.features(), [7.0, 120.0, 4.0, 2.0, 0.3]);
        assert_eq!(t.targets(), [1.0, 1.0, 0.0, 1.0]);
    }
}
