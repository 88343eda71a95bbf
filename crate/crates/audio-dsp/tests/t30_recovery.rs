//! Reverberation-time recovery across the full range of room conditions the
//! pipeline encounters, on deterministic synthetic decays.

use audio_dsp::{estimate_t30, AudioClip, OCTAVE_BAND_CENTERS_HZ};

fn multitone_decay(fs: u32, t60: f64, seconds: f64) -> AudioClip {
    let n = (fs as f64 * seconds) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs as f64;
            let carrier: f64 = OCTAVE_BAND_CENTERS_HZ
                .iter()
                .map(|f| 0.25 * (2.0 * std::f64::consts::PI * f * t).sin())
                .sum();
            carrier * 10f64.powf(-3.0 * t / t60)
        })
        .collect();
    AudioClip::mono(fs, samples)
}

#[test]
fn recovers_room_range_within_tolerance() {
    for t in [0.04, 0.19, 0.32, 0.43, 0.56, 0.78] {
        let clip = multitone_decay(22050, t, t * 1.2 + 0.4);
        let est = estimate_t30(&clip).unwrap();
        let rel = (est.t30_s - t).abs() / t;
        let tolerance = if t < 0.1 { 0.10 } else { 0.05 };
        println!(
            "t60 {t:.2} s: estimated {:.4} s (rel err {rel:.4}), bands {:?}",
            est.t30_s, est.band_t30_s
        );
        assert!(
            rel < tolerance,
            "t60 {t}: estimated {:.4} (rel err {rel:.4}), bands {:?}",
            est.t30_s,
            est.band_t30_s
        );
    }
}

#[test]
fn estimate_is_gain_invariant() {
    let clip = multitone_decay(22050, 0.43, 1.0);
    let quiet = AudioClip::mono(22050, clip.samples.iter().map(|s| s * 0.01).collect());
    let a = estimate_t30(&clip).unwrap();
    let b = estimate_t30(&quiet).unwrap();
    assert!((a.t30_s - b.t30_s).abs() < 1e-9);
}

#[test]
fn stereo_clip_estimates_like_its_mono_mixdown() {
    let mono = multitone_decay(22050, 0.32, 0.9);
    let stereo = AudioClip {
        sample_rate: 22050,
        channels: 2,
        samples: mono.samples.iter().flat_map(|s| [*s, *s]).collect(),
    };
    let a = estimate_t30(&mono).unwrap();
    let b = estimate_t30(&stereo).unwrap();
    assert!((a.t30_s - b.t30_s).abs() < 1e-12);
}
