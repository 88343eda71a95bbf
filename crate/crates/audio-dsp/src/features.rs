//! Log-mel spectrogram extraction.
//!
//! Frames are windowed with a periodic Hamming window, transformed with an
//! FFT of the window length, and the one-sided power spectrum is pooled
//! through a triangular mel filterbank (HTK mel scale, unit-peak filters)
//! before taking the natural log with a fixed power floor.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Deserialize;

use crate::clip::AudioClip;
use crate::resample::resample;
use crate::{DspError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Analysis rate; clips at other rates are resampled first.
    pub sample_rate_hz: u32,
    /// Window and FFT length in samples (46 ms at 22050 Hz).
    pub window_len: usize,
    /// Hop between frames in samples (two thirds of the window, rounded).
    pub hop_len: usize,
    pub n_mels: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Power values are clamped to this floor before the log.
    pub power_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 22050,
            window_len: 1024,
            hop_len: 683,
            n_mels: 64,
            f_min_hz: 50.0,
            f_max_hz: 11025.0,
            power_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.hop_len == 0 || self.n_mels == 0 {
            return Err(DspError::InvalidConfig(
                "window_len, hop_len and n_mels must be nonzero".into(),
            ));
        }
        if self.sample_rate_hz == 0 {
            return Err(DspError::InvalidConfig("sample_rate_hz must be nonzero".into()));
        }
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        if !(self.f_min_hz >= 0.0 && self.f_min_hz < self.f_max_hz) {
            return Err(DspError::InvalidConfig(format!(
                "mel band edges must satisfy 0 <= f_min < f_max (got {} and {})",
                self.f_min_hz, self.f_max_hz
            )));
        }
        if self.f_max_hz > nyquist {
            return Err(DspError::InvalidConfig(format!(
                "f_max_hz {} exceeds the Nyquist frequency {nyquist}",
                self.f_max_hz
            )));
        }
        if !(self.power_floor > 0.0) {
            return Err(DspError::InvalidConfig("power_floor must be positive".into()));
        }
        Ok(())
    }

    /// Frames produced for a clip of `n` samples: `1 + ⌊(n − window)/hop⌋`.
    /// No padding or centering is applied.
    pub fn num_frames(&self, n: usize) -> Result<usize> {
        if n < self.window_len {
            return Err(DspError::TooShort {
                samples: n,
                needed: self.window_len,
            });
        }
        Ok(1 + (n - self.window_len) / self.hop_len)
    }
}

/// A `[frames, n_mels]` feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMel {
    pub frames: usize,
    pub n_mels: usize,
    pub data: Vec<f64>,
}

impl LogMel {
    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.n_mels..(frame + 1) * self.n_mels]
    }
}

pub(crate) fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub(crate) fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Periodic Hamming window of length `n`.
pub(crate) fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Triangular mel filterbank as a dense `[n_mels, n_bins]` matrix. Filters
/// are unnormalized (each triangle peaks at 1.0); bin `k` sits at frequency
/// `k · sr / n_fft`.
pub(crate) fn mel_filterbank(config: &FeatureConfig) -> Vec<f64> {
    let n_bins = config.window_len / 2 + 1;
    let mel_lo = hz_to_mel(config.f_min_hz);
    let mel_hi = hz_to_mel(config.f_max_hz);
    let edges: Vec<f64> = (0..config.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (config.n_mels + 1) as f64))
        .collect();
    let bin_hz = config.sample_rate_hz as f64 / config.window_len as f64;
    let mut bank = vec![0.0; config.n_mels * n_bins];
    for m in 0..config.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f <= lo || f >= hi {
                0.0
            } else if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            };
            bank[m * n_bins + k] = w;
        }
    }
    bank
}

/// One-sided power spectra of every frame: `[frames, window/2 + 1]`.
pub(crate) fn power_spectrogram(samples: &[f64], config: &FeatureConfig) -> Result<Vec<f64>> {
    let frames = config.num_frames(samples.len())?;
    let n = config.window_len;
    let n_bins = n / 2 + 1;
    let window = hamming(n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut out = vec![0.0; frames * n_bins];
    for frame in 0..frames {
        let start = frame * config.hop_len;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, b) in buf.iter().take(n_bins).enumerate() {
            out[frame * n_bins + k] = b.norm_sqr();
        }
    }
    Ok(out)
}

/// Extracts `[frames, n_mels]` log-mel features from a clip. Stereo clips
/// are mixed down and clips at other sample rates are resampled to the
/// configured analysis rate first.
pub fn extract_log_mel(clip: &AudioClip, config: &FeatureConfig) -> Result<LogMel> {
    config.validate()?;
    clip.validate()?;
    let mono = clip.to_mono();
    let mono = if mono.sample_rate == config.sample_rate_hz {
        mono
    } else {
        resample(&mono, config.sample_rate_hz)?
    };

    let n_bins = config.window_len / 2 + 1;
    let power = power_spectrogram(&mono.samples, config)?;
    let frames = power.len() / n_bins;
    let bank = mel_filterbank(config);

    let mut data = vec![0.0; frames * config.n_mels];
    for frame in 0..frames {
        let spec = &power[frame * n_bins..(frame + 1) * n_bins];
        for m in 0..config.n_mels {
            let filt = &bank[m * n_bins..(m + 1) * n_bins];
            let energy: f64 = filt.iter().zip(spec).map(|(w, p)| w * p).sum();
            data[frame * config.n_mels + m] = energy.max(config.power_floor).ln();
        }
    }
    Ok(LogMel {
        frames,
        n_mels: config.n_mels,
        data,
    })
}
