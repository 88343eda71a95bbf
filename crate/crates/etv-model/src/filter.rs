//! Training-set selection and augmentation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::types::{EnvironmentContext, InteractionTuple, UserProfile};
use crate::{EtvError, Result};

/// Keeps the tuples worth imitating: the word was understood perfectly
/// (similarity 1 within 1e-9) and the listener rated the experience better
/// than the scale midpoint (strictly above 5).
pub fn filter_training_set(tuples: &[InteractionTuple]) -> Result<Vec<InteractionTuple>> {
    let kept: Vec<InteractionTuple> = tuples
        .iter()
        .filter(|t| (t.phonetic_similarity - 1.0).abs() <= 1e-9 && t.ux > 5.0)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(EtvError::NoAdmissibleTuples);
    }
    Ok(kept)
}

/// Expands the dataset with jittered variants: each tuple is returned
/// unchanged followed by `copies` noisy versions whose five input features
/// get additive Gaussian noise with per-feature sigma = `noise_scale` times
/// that feature's standard deviation across `tuples`. Targets (the voice
/// parameters) and outcomes are never touched, and jittered inputs are
/// clamped back into their valid ranges. Deterministic in `seed`.
pub fn augment(
    tuples: &[InteractionTuple],
    noise_scale: f64,
    copies: usize,
    seed: u64,
) -> Result<Vec<InteractionTuple>> {
    if !noise_scale.is_finite() || noise_scale < 0.0 {
        return Err(EtvError::Config(format!(
            "noise_scale must be non-negative, got {noise_scale}"
        )));
    }
    let n = tuples.len();
    let mut out = Vec::with_capacity(n * (1 + copies));
    out.extend_from_slice(tuples);
    if n == 0 || copies == 0 {
        return Ok(out);
    }

    // Per-feature population standard deviation over the input features.
    let mut mean = [0.0; 5];
    for t in tuples {
        for (m, x) in mean.iter_mut().zip(t.features()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = [0.0; 5];
    for t in tuples {
        for ((v, m), x) in var.iter_mut().zip(mean).zip(t.features()) {
            *v += (x - m) * (x - m);
        }
    }
    let sigma: Vec<f64> = var
        .iter()
        .map(|v| (v / n as f64).sqrt() * noise_scale)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for t in tuples {
        for _ in 0..copies {
            let noise: Vec<f64> = (0..5).map(|j| sigma[j] * normal.sample(&mut rng)).collect();
            let f = t.features();
            let mut v = t.clone();
            v.env.annoyance = (f[0] + noise[0]).clamp(
                EnvironmentContext::ANNOYANCE_RANGE.0,
                EnvironmentContext::ANNOYANCE_RANGE.1,
            );
            v.env.distance_cm = (f[1] + noise[1]).clamp(
                EnvironmentContext::DISTANCE_RANGE.0,
                EnvironmentContext::DISTANCE_RANGE.1,
            );
            v.profile.english_cefr =
                (f[2] + noise[2]).clamp(UserProfile::CEFR_RANGE.0, UserProfile::CEFR_RANGE.1);
            v.profile.hearing_difficulty =
                (f[3] + noise[3]).clamp(UserProfile::HEARING_RANGE.0, UserProfile::HEARING_RANGE.1);
            v.env.t30_s = (f[4] + noise[4]).max(1e-3);
            out.push(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::VoiceParameters;

    fn tuple(similarity: f64, ux: f64) -> InteractionTuple {
        InteractionTuple {
            subject_id: "s1".into(),
            word_id: "w1".into(),
            voice: VoiceParameters::default(),
            env: EnvironmentContext::new(5.0, 200.0, 0.4).unwrap(),
            profile: UserProfile::new(2.0, 3.0).unwrap(),
            phonetic_similarity: similarity,
            ux,
        }
    }

    #[test]
    fn keeps_perfect_and_pleasant_only() {
        let tuples = vec![
            tuple(1.0, 6.0),              // kept
            tuple(1.0, 5.0),              // ux not strictly above 5
            tuple(0.93, 9.0),             // imperfect similarity
            tuple(1.0 - 5e-10, 7.0),      // within the 1e-9 similarity slack
            tuple(1.0, 5.000001),         // strictly above
        ];
        let kept = filter_training_set(&tuples).unwrap();
        assert_eq!(kept.len(), 3);
        assert!(kept.iter().all(|t| t.ux > 5.0));
    }

    #[test]
    fn filter_is_idempotent_and_matches_a_linear_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let tuples: Vec<InteractionTuple> = (0..100)
            .map(|_| {
                let similarity = if rng.gen_bool(0.4) {
                    1.0
                } else {
                    rng.gen_range(0.0..1.0)
                };
                tuple(similarity, rng.gen_range(1.0..10.0))
            })
            .collect();

        let kept = filter_training_set(&tuples).unwrap();
        let oracle: Vec<&InteractionTuple> = tuples
            .iter()
            .filter(|t| (t.phonetic_similarity - 1.0).abs() <= 1e-9 && t.ux > 5.0)
            .collect();
        assert_eq!(kept.len(), oracle.len());
        for (a, b) in kept.iter().zip(oracle) {
            assert_eq!(a, b);
        }

        let twice = filter_training_set(&kept).unwrap();
        assert_eq!(twice, kept);
    }

    #[test]
    fn empty_result_is_an_error() {
        let tuples = vec![tuple(0.5, 9.0), tuple(1.0, 3.0)];
        assert!(matches!(
            filter_training_set(&tuples),
            Err(EtvError::NoAdmissibleTuples)
        ));
    }

    #[test]
    fn zero_noise_copies_are_exact_duplicates() {
        let tuples = vec![tuple(1.0, 7.0), tuple(1.0, 8.0)];
        let out = augment(&tuples, 0.0, 3, 5).unwrap();
        assert_eq!(out.len(), 2 * (1 + 3));
        for v in &out[2..] {
            assert!(v == &tuples[0] || v == &tuples[1]);
        }
    }

    #[test]
    fn augmentation_is_deterministic_in_the_seed() {
        // Features must vary across tuples or the per-feature sigma is zero
        // and every seed degenerates to exact copies.
        let tuples: Vec<InteractionTuple> = (0..10)
            .map(|i| {
                let mut t = tuple(1.0, 6.0 + (i % 4) as f64);
                t.env.annoyance = 1.0 + i as f64 * 0.9;
                t.env.distance_cm = 60.0 + i as f64 * 40.0;
                t
            })
            .collect();
        let a = augment(&tuples, 0.1, 4, 7).unwrap();
        let b = augment(&tuples, 0.1, 4, 7).unwrap();
        let c = augment(&tuples, 0.1, 4, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn jitter_never_leaves_the_valid_ranges() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let tuples: Vec<InteractionTuple> = (0..100)
            .map(|_| {
                let mut t = tuple(1.0, 7.0);
                t.env.annoyance = rng.gen_range(1.0..=10.0);
                t.env.distance_cm = rng.gen_range(60.0..=500.0);
                t.env.t30_s = rng.gen_range(0.04..=0.78);
                t.profile.english_cefr = rng.gen_range(1..=6) as f64;
                t.profile.hearing_difficulty = rng.gen_range(1..=5) as f64;
                t
            })
            .collect();
        // A huge noise scale forces the clamps to do the work.
        let out = augment(&tuples, 10.0, 100, 3).unwrap();
        assert_eq!(out.len(), 100 * 101);
        for v in &out {
            v.validate().unwrap();
            assert!((60.0..=500.0).contains(&v.env.distance_cm));
        }
    }

    #[test]
    fn targets_survive_augmentation_untouched() {
        let mut t = tuple(1.0, 7.0);
        t.voice = VoiceParameters::new(1.7, 0.9, 3.0, 2.5).unwrap();
        let out = augment(&[t.clone()], 0.5, 10, 1).unwrap();
        for v in &out {
            assert_eq!(v.voice, t.voice);
            assert_eq!(v.phonetic_similarity, t.phonetic_similarity);
            assert_eq!(v.ux, t.ux);
        }
    }
}
