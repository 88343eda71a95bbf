//! Audio loading and signal processing: WAV decoding, log-mel spectrogram
//! extraction, band-limited resampling and reverberation-time estimation.

mod clip;
mod features;
mod resample;
mod t30;

pub use clip::{read_wav, write_wav, AudioClip};
pub use features::{extract_log_mel, FeatureConfig, LogMel};
pub use resample::resample;
pub use t30::{estimate_t30, T30Estimate, OCTAVE_BAND_CENTERS_HZ};

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("clip is empty")]
    EmptyClip,
    #[error("clip contains non-finite samples")]
    NonFiniteSamples,
    #[error("clip too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("decay range insufficient in {band_hz} Hz band: {detail}")]
    InsufficientDecay { band_hz: f64, detail: String },
    #[error("decay fit too poor in {band_hz} Hz band: r² = {r2:.3} (need ≥ {min_r2})")]
    PoorDecayFit { band_hz: f64, r2: f64, min_r2: f64 },
    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DspError>;
