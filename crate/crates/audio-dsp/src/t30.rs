//! Reverberation-time (T30) estimation.
//!
//! The clip is split into four octave bands (250 Hz to 2 kHz) with
//! fourth-order Butterworth band-passes applied time-reversed, so the
//! filters' own ring-down lands ahead of the sound instead of smearing the
//! decay tail. Each band's Schroeder backward-integrated energy decay curve
//! is fit with a least-squares line between -5 dB and -35 dB; the band T30
//! extrapolates that slope to 60 dB and the estimate averages the bands.

use rustfft::num_complex::Complex;

use crate::clip::AudioClip;
use crate::{DspError, Result};

pub const OCTAVE_BAND_CENTERS_HZ: [f64; 4] = [250.0, 500.0, 1000.0, 2000.0];

const FIT_UPPER_DB: f64 = -5.0;
const FIT_LOWER_DB: f64 = -35.0;
const MIN_FIT_FRAMES_MS: usize = 10;
const MIN_R2: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub struct T30Estimate {
    /// Mean of the per-band reverberation times, in seconds.
    pub t30_s: f64,
    pub band_t30_s: [f64; 4],
    /// Coefficient of determination of each band's decay-line fit.
    pub band_r2: [f64; 4],
}

/// One second-order section in direct form II transposed.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn filter(&self, x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        y.reserve(x.len());
        let (mut s1, mut s2) = (0.0, 0.0);
        for &xn in x {
            let yn = self.b[0] * xn + s1;
            s1 = self.b[1] * xn - self.a[0] * yn + s2;
            s2 = self.b[2] * xn - self.a[1] * yn;
            y.push(yn);
        }
    }
}

/// Designs a fourth-order Butterworth band-pass (second-order low-pass
/// prototype through the band-pass transform, then bilinear) as a cascade
/// of two biquads plus an overall gain.
fn butterworth_bandpass(f_lo: f64, f_hi: f64, fs: f64) -> (Vec<Biquad>, f64) {
    // Pre-warped analog edge frequencies.
    let w_lo = 2.0 * fs * (std::f64::consts::PI * f_lo / fs).tan();
    let w_hi = 2.0 * fs * (std::f64::consts::PI * f_hi / fs).tan();
    let w0 = (w_lo * w_hi).sqrt();
    let bw = w_hi - w_lo;

    // Second-order Butterworth prototype poles at 135° and 225°.
    let prototype = [
        Complex::from_polar(1.0, 3.0 * std::f64::consts::PI / 4.0),
        Complex::from_polar(1.0, 5.0 * std::f64::consts::PI / 4.0),
    ];

    // Low-pass → band-pass: each prototype pole p becomes the two roots of
    // s² − p·B·s + ω₀² = 0.
    let mut analog_poles = Vec::with_capacity(4);
    for p in prototype {
        let pb = p * bw;
        let disc = (pb * pb - Complex::new(4.0 * w0 * w0, 0.0)).sqrt();
        analog_poles.push((pb + disc) / 2.0);
        analog_poles.push((pb - disc) / 2.0);
    }

    // Bilinear transform of the poles; the 2 zeros at s=0 and 2 at s=∞ map
    // to z=1 and z=-1.
    let two_fs = Complex::new(2.0 * fs, 0.0);
    let digital_poles: Vec<Complex<f64>> = analog_poles
        .iter()
        .map(|s| (two_fs + s) / (two_fs - s))
        .collect();

    // Pair conjugate poles into biquads, each carrying one zero at z=1 and
    // one at z=-1 (numerator z² - 1).
    let mut upper: Vec<Complex<f64>> = digital_poles
        .iter()
        .copied()
        .filter(|p| p.im > 0.0)
        .collect();
    upper.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    debug_assert_eq!(upper.len(), 2, "octave-band poles are complex conjugate pairs");
    let biquads: Vec<Biquad> = upper
        .iter()
        .map(|p| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * p.re, p.norm_sqr()],
        })
        .collect();

    // Normalize to unit gain at the geometric band center.
    let fc = (f_lo * f_hi).sqrt();
    let z = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * fc / fs);
    let mut h = Complex::new(1.0, 0.0);
    for bq in &biquads {
        let num = z * z * bq.b[0] + z * bq.b[1] + bq.b[2];
        let den = z * z + z * bq.a[0] + bq.a[1];
        h = h * num / den;
    }
    (biquads, 1.0 / h.norm())
}

/// Applies the band-pass to the time-reversed signal and reverses back.
fn reverse_bandpass(samples: &[f64], f_lo: f64, f_hi: f64, fs: f64) -> Vec<f64> {
    let (biquads, gain) = butterworth_bandpass(f_lo, f_hi, fs);
    let mut x: Vec<f64> = samples.iter().rev().copied().collect();
    let mut y = Vec::with_capacity(x.len());
    for bq in &biquads {
        bq.filter(&x, &mut y);
        std::mem::swap(&mut x, &mut y);
    }
    x.reverse();
    for v in &mut x {
        *v *= gain;
    }
    x
}

struct BandFit {
    t30_s: f64,
    r2: f64,
}

/// Schroeder integration and decay-line fit for one band signal.
fn fit_band_decay(band: &[f64], fs: f64, band_hz: f64) -> Result<BandFit> {
    // Backward-integrated energy decay curve.
    let mut edc = vec![0.0; band.len()];
    let mut acc = 0.0;
    for (i, v) in band.iter().enumerate().rev() {
        acc += v * v;
        edc[i] = acc;
    }
    let total = edc[0];
    if total <= 0.0 {
        return Err(DspError::InsufficientDecay {
            band_hz,
            detail: "band signal carries no energy".into(),
        });
    }

    // Locate the fit region via linear-energy thresholds.
    let hi_thresh = total * 10f64.powf(FIT_UPPER_DB / 10.0);
    let lo_thresh = total * 10f64.powf(FIT_LOWER_DB / 10.0);
    let i_hi = edc.iter().position(|e| *e <= hi_thresh);
    let i_lo = edc.iter().position(|e| *e <= lo_thresh);
    let (i_hi, i_lo) = match (i_hi, i_lo) {
        (Some(a), Some(b)) if b > a => (a, b),
        _ => {
            return Err(DspError::InsufficientDecay {
                band_hz,
                detail: format!(
                    "energy decay never spans {FIT_UPPER_DB} dB to {FIT_LOWER_DB} dB"
                ),
            });
        }
    };
    let frames_ms = ((i_lo - i_hi) as f64 * 1000.0 / fs) as usize;
    if frames_ms < MIN_FIT_FRAMES_MS {
        return Err(DspError::InsufficientDecay {
            band_hz,
            detail: format!(
                "fit region covers {frames_ms} ms frames, need at least {MIN_FIT_FRAMES_MS}"
            ),
        });
    }

    // Least-squares line through (time, level-in-dB) over the fit region.
    let n = (i_lo - i_hi + 1) as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for i in i_hi..=i_lo {
        sx += i as f64 / fs;
        sy += 10.0 * (edc[i] / total).log10();
    }
    let (mx, my) = (sx / n, sy / n);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in i_hi..=i_lo {
        let dx = i as f64 / fs - mx;
        let dy = 10.0 * (edc[i] / total).log10() - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy) / (sxx * syy);
    if !(r2 >= MIN_R2) {
        return Err(DspError::PoorDecayFit {
            band_hz,
            r2,
            min_r2: MIN_R2,
        });
    }
    if !(slope < 0.0) {
        return Err(DspError::InsufficientDecay {
            band_hz,
            detail: format!("decay slope {slope:.2} dB/s is not negative"),
        });
    }
    Ok(BandFit {
        t30_s: -60.0 / slope,
        r2,
    })
}

/// Estimates the reverberation time of a clip from its energy decay.
pub fn estimate_t30(clip: &AudioClip) -> Result<T30Estimate> {
    clip.validate()?;
    let mono = clip.to_mono();
    let fs = mono.sample_rate as f64;
    let top_edge = OCTAVE_BAND_CENTERS_HZ[3] * std::f64::consts::SQRT_2;
    if fs / 2.0 <= top_edge {
        return Err(DspError::InvalidConfig(format!(
            "sample rate {} Hz cannot resolve the {top_edge:.0} Hz octave-band edge",
            mono.sample_rate
        )));
    }

    let mut band_t30_s = [0.0; 4];
    let mut band_r2 = [0.0; 4];
    for (i, center) in OCTAVE_BAND_CENTERS_HZ.iter().enumerate() {
        let f_lo = center / std::f64::consts::SQRT_2;
        let f_hi = center * std::f64::consts::SQRT_2;
        let band = reverse_bandpass(&mono.samples, f_lo, f_hi, fs);
        let fit = fit_band_decay(&band, fs, *center)?;
        band_t30_s[i] = fit.t30_s;
        band_r2[i] = fit.r2;
    }
    Ok(T30Estimate {
        t30_s: band_t30_s.iter().sum::<f64>() / 4.0,
        band_t30_s,
        band_r2,
    })
}
