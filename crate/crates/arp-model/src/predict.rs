//! Inference: log-mel extraction, the forward pass, and the [1, 10] clamp.

use audio_dsp::{extract_log_mel, AudioClip, FeatureConfig, LogMel};
use nn_core::{Model, Tensor};
use serde::{Deserialize, Serialize};

use crate::{ArpError, Result, MIN_INPUT_DIM};

/// A predicted annoyance rating: `value` is clamped to [1, 10], `raw` is the
/// unclamped network output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnoyanceRating {
    pub value: f64,
    pub raw: f64,
}

impl AnnoyanceRating {
    pub fn from_raw(raw: f64) -> Self {
        AnnoyanceRating {
            value: raw.clamp(1.0, 10.0),
            raw,
        }
    }
}

/// Packs one spectrogram into a [1, 1, frames, mels] network input, checking
/// that both dimensions survive six 2x2 pooling stages.
pub fn spectrogram_tensor(logmel: &LogMel) -> Result<Tensor> {
    if logmel.frames < MIN_INPUT_DIM || logmel.n_mels < MIN_INPUT_DIM {
        return Err(ArpError::SpectrogramTooSmall {
            frames: logmel.frames,
            mels: logmel.n_mels,
            min: MIN_INPUT_DIM,
        });
    }
    Ok(Tensor::from_vec(
        &[1, 1, logmel.frames, logmel.n_mels],
        logmel.data.clone(),
    )?)
}

/// Runs the full inference path on a clip: feature extraction with default
/// settings, an eval-mode forward pass, and the output clamp.
pub fn predict_ar(model: &Model, clip: &AudioClip) -> Result<AnnoyanceRating> {
    let features = extract_log_mel(clip, &FeatureConfig::default())?;
    predict_from_features(model, &features)
}

/// The network half of [`predict_ar`], for callers that extract features
/// themselves (custom feature settings, or staged timing).
pub fn predict_from_features(model: &Model, features: &LogMel) -> Result<AnnoyanceRating> {
    let input = spectrogram_tensor(features)?;
    let output = model.forward(&input)?;
    let raw = output.scalar().ok_or_else(|| {
        ArpError::Config(format!(
            "model output has shape {:?}, expected a single scalar",
            output.shape()
        ))
    })?;
    Ok(AnnoyanceRating::from_raw(raw))
}
