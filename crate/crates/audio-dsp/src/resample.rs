//! Band-limited sample-rate conversion with a Hann-windowed sinc kernel.

use crate::clip::AudioClip;
use crate::{DspError, Result};

/// Half-width of the sinc kernel in zero crossings. Wider kernels sharpen
/// the transition band at proportional cost.
const KERNEL_ZERO_CROSSINGS: f64 = 32.0;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Resamples a mono clip to `target_rate`. The interpolation kernel is a
/// Hann-windowed sinc low-passed at the lower of the two Nyquist
/// frequencies, so downsampling stays alias-free.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    clip.validate()?;
    if clip.channels != 1 {
        return Err(DspError::UnsupportedFormat(
            "resample expects a mono clip; call to_mono first".into(),
        ));
    }
    if target_rate == 0 {
        return Err(DspError::InvalidConfig("target sample rate must be nonzero".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }

    let ratio = target_rate as f64 / clip.sample_rate as f64;
    // Cutoff relative to the input Nyquist; < 1 when downsampling.
    let cutoff = ratio.min(1.0);
    let half_width = KERNEL_ZERO_CROSSINGS / cutoff;
    let n = clip.samples.len();
    let out_len = (n as f64 * ratio).round() as usize;

    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let t = j as f64 / ratio;
        let lo = ((t - half_width).ceil() as isize).max(0) as usize;
        let hi = ((t + half_width).floor() as isize).min(n as isize - 1) as usize;
        let mut acc = 0.0;
        for (i, x) in clip.samples[lo..=hi].iter().enumerate() {
            let d = t - (lo + i) as f64;
            let w = 0.5 * (1.0 + (std::f64::consts::PI * d / half_width).cos());
            acc += x * cutoff * sinc(cutoff * d) * w;
        }
        out.push(acc);
    }
    Ok(AudioClip::mono(target_rate, out))
}
