//! End-to-end adaptation: audio clip in, voice parameters out, with the
//! annoyance prediction and per-stage timings reported along the way.

use std::path::Path;
use std::time::Instant;

use arp_model::predict_from_features;
use audio_dsp::{extract_log_mel, AudioClip};
use etv_model::{adapt_voice, EnvironmentContext, EtvModel, UserProfile, VoiceParameters};
use nn_core::Model;
use serde::Serialize;

use crate::{PipelineConfig, Result};

/// Wall-clock seconds spent in each stage of one adaptation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageTimings {
    pub features_s: f64,
    pub prediction_s: f64,
    pub adaptation_s: f64,
    pub total_s: f64,
}

/// The listening context an adaptation ran under, echoed for the record.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContextEcho {
    pub distance_cm: f64,
    pub t30_s: f64,
    pub extrapolation: bool,
    pub hearing_difficulty: f64,
    pub english_cefr: f64,
}

/// Everything one adaptation produced.
#[derive(Debug, Clone, Serialize)]
pub struct AdaptationReport {
    /// The clip the annoyance prediction came from.
    pub clip: String,
    pub clip_duration_s: f64,
    /// Unclamped network output, for diagnostics.
    pub ar_raw: f64,
    /// Annoyance rating clamped to [1, 10]; this is what drives the voice.
    pub ar: f64,
    pub context: ContextEcho,
    pub voice: VoiceParameters,
    pub timings: StageTimings,
}

/// A loaded pipeline: the annoyance CNN, the voice regressor, and the
/// configuration they came from.
pub struct Pipeline {
    pub arp: Model,
    pub etv: EtvModel,
    pub config: PipelineConfig,
}

impl Pipeline {
    /// Loads both models named by an already-validated configuration.
    pub fn load(config: PipelineConfig) -> Result<Self> {
        let arp = nn_core::load_weights(&config.arp_weights)?;
        let etv = EtvModel::load(&config.etv_weights)?;
        Ok(Pipeline { arp, etv, config })
    }

    /// Runs the full chain on one clip: log-mel features, annoyance
    /// prediction, then voice adaptation for the given listener and room.
    pub fn adapt(
        &self,
        clip: &AudioClip,
        clip_name: &str,
        profile: &UserProfile,
        distance_cm: f64,
        t30_s: f64,
    ) -> Result<AdaptationReport> {
        let start = Instant::now();

        let features = extract_log_mel(clip, &self.config.features)?;
        let features_s = start.elapsed().as_secs_f64();

        let prediction_start = Instant::now();
        let rating = predict_from_features(&self.arp, &features)?;
        let prediction_s = prediction_start.elapsed().as_secs_f64();

        let adaptation_start = Instant::now();
        let env = EnvironmentContext::extrapolated(rating.value, distance_cm, t30_s)?;
        let voice = adapt_voice(&self.etv, &env, profile)?;
        let adaptation_s = adaptation_start.elapsed().as_secs_f64();

        Ok(AdaptationReport {
            clip: clip_name.to_string(),
            clip_duration_s: clip.duration_s(),
            ar_raw: rating.raw,
            ar: rating.value,
            context: ContextEcho {
                distance_cm,
                t30_s,
                extrapolation: env.extrapolation,
                hearing_difficulty: profile.hearing_difficulty,
                english_cefr: profile.english_cefr,
            },
            voice,
            timings: StageTimings {
                features_s,
                prediction_s,
                adaptation_s,
                total_s: start.elapsed().as_secs_f64(),
            },
        })
    }
}

/// Convenience wrapper: load the models fresh and adapt one clip.
pub fn adapt(
    clip: &AudioClip,
    clip_name: &str,
    profile: &UserProfile,
    distance_cm: f64,
    t30_s: f64,
    config: &PipelineConfig,
) -> Result<AdaptationReport> {
    let pipeline = Pipeline::load(config.clone())?;
    pipeline.adapt(clip, clip_name, profile, distance_cm, t30_s)
}

/// Reads a clip from disk, resolving the name used in reports.
pub fn read_clip(path: &Path) -> Result<(AudioClip, String)> {
    let clip = audio_dsp::read_wav(path)?;
    Ok((clip, path.display().to_string()))
}
