//! In-memory audio clips and WAV decoding.

use std::path::Path;

use crate::{DspError, Result};

/// Uncompressed audio: samples normalized to roughly [-1, 1], interleaved
/// when stereo.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub sample_rate: u32,
    pub channels: u16,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Self {
        Self {
            sample_rate,
            channels: 1,
            samples,
        }
    }

    /// Number of sample frames (per-channel samples).
    pub fn num_frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.num_frames() as f64 / self.sample_rate as f64
    }

    /// Averages channels into a mono clip; a mono clip is returned as-is.
    pub fn to_mono(&self) -> AudioClip {
        if self.channels == 1 {
            return self.clone();
        }
        let ch = self.channels as usize;
        let mono: Vec<f64> = self
            .samples
            .chunks_exact(ch)
            .map(|frame| frame.iter().sum::<f64>() / ch as f64)
            .collect();
        AudioClip::mono(self.sample_rate, mono)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(DspError::EmptyClip);
        }
        if !self.samples.iter().all(|s| s.is_finite()) {
            return Err(DspError::NonFiniteSamples);
        }
        Ok(())
    }
}

/// Reads a 16-bit PCM or 32-bit float WAV file with one or two channels.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(DspError::UnsupportedFormat(format!(
            "{} channels (only mono and stereo are supported)",
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(DspError::UnsupportedFormat(format!(
                "{bits}-bit {}",
                match fmt {
                    hound::SampleFormat::Int => "integer",
                    hound::SampleFormat::Float => "float",
                }
            )));
        }
    };
    let clip = AudioClip {
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        samples,
    };
    clip.validate()?;
    Ok(clip)
}

/// Writes a clip as 32-bit float WAV.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: clip.channels,
        sample_rate: clip.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for s in &clip.samples {
        writer.write_sample(*s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn to_mono_averages_channels() {
        let clip = AudioClip {
            sample_rate: 8000,
            channels: 2,
            samples: vec![1.0, 0.0, 0.5, -0.5, -1.0, 1.0],
        };
        let mono = clip.to_mono();
        assert_eq!(mono.channels, 1);
        assert_eq!(mono.samples, vec![0.5, 0.0, 0.0]);
        assert_eq!(mono.num_frames(), 3);
    }

    #[test]
    fn wav_round_trip_float() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let clip = AudioClip::mono(22050, vec![0.0, 0.25, -0.5, 1.0]);
        write_wav(&path, &clip).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 22050);
        assert_eq!(back.channels, 1);
        for (a, b) in back.samples.iter().zip(&clip.samples) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn wav_reads_pcm16_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t16.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 44100,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        for v in [0i16, 16384, -16384, 32767] {
            writer.write_sample(v).unwrap();
        }
        writer.finalize().unwrap();
        let clip = read_wav(&path).unwrap();
        assert_eq!(clip.channels, 2);
        assert_eq!(clip.num_frames(), 2);
        assert!((clip.samples[1] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn rejects_unsupported_bit_depth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t8.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        writer.write_sample(0i8).unwrap();
        writer.finalize().unwrap();
        let err = read_wav(&path).unwrap_err();
        assert!(matches!(err, DspError::UnsupportedFormat(_)), "{err}");
    }
}
