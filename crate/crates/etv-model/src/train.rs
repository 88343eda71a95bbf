//! Environment-to-voice regressor: a small MLP from five scene features to
//! four voice parameters, with its normalization constants carried inside
//! the weight file so a saved model is self-contained.

use std::path::Path;

use nn_core::{
    load_weights, save_weights, AdamConfig, AdamState, LayerSpec, Model, NnError, Phase, Tensor,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::types::{
    EnvironmentContext, InteractionTuple, UserProfile, VoiceParameters, FEATURE_ORDER,
    OUTPUT_ORDER,
};
use crate::{EtvError, Result};

const MODEL_KIND: &str = "environment-to-voice";

/// Training settings. Defaults are the published recipe: Adam at 1e-4 for
/// 200 epochs with a 10% holdout.
#[derive(Debug, Clone, Serialize)]
pub struct EtvConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of tuples set aside for the held-out error report.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for EtvConfig {
    fn default() -> Self {
        EtvConfig {
            learning_rate: 1e-4,
            epochs: 200,
            batch_size: 32,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

impl EtvConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(EtvError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(EtvError::Config(
                "epochs and batch size must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(EtvError::Config(format!(
                "holdout fraction must lie in [0, 1), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}

fn layer_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::FullyConnected {
            in_features: 5,
            out_features: 16,
        },
        LayerSpec::Relu,
        LayerSpec::FullyConnected {
            in_features: 16,
            out_features: 32,
        },
        LayerSpec::Relu,
        LayerSpec::FullyConnected {
            in_features: 32,
            out_features: 4,
        },
    ]
}

/// Trained regressor plus the normalization constants baked into the weight
/// file: per-feature z-score constants for inputs and the fixed voice
/// parameter ranges for min-max output scaling.
#[derive(Debug, Clone)]
pub struct EtvModel {
    model: Model,
    input_mean: [f64; 5],
    input_std: [f64; 5],
    output_min: [f64; 4],
    output_max: [f64; 4],
}

impl EtvModel {
    fn from_parts(model: Model, input_mean: [f64; 5], input_std: [f64; 5]) -> Self {
        let ranges = VoiceParameters::ranges();
        let mut m = EtvModel {
            model,
            input_mean,
            input_std,
            output_min: ranges.map(|(lo, _)| lo),
            output_max: ranges.map(|(_, hi)| hi),
        };
        m.write_extras();
        m
    }

    fn write_extras(&mut self) {
        let ex = &mut self.model.extras;
        ex.tensors.insert(
            "input_mean".into(),
            Tensor::from_vec(&[5], self.input_mean.to_vec()).expect("const shape"),
        );
        ex.tensors.insert(
            "input_std".into(),
            Tensor::from_vec(&[5], self.input_std.to_vec()).expect("const shape"),
        );
        ex.tensors.insert(
            "output_min".into(),
            Tensor::from_vec(&[4], self.output_min.to_vec()).expect("const shape"),
        );
        ex.tensors.insert(
            "output_max".into(),
            Tensor::from_vec(&[4], self.output_max.to_vec()).expect("const shape"),
        );
        ex.notes.insert("model".into(), MODEL_KIND.into());
        ex.notes
            .insert("feature_order".into(), FEATURE_ORDER.join(","));
        ex.notes.insert("output_order".into(), OUTPUT_ORDER.join(","));
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_weights(&self.model, path)?;
        Ok(())
    }

    /// Loads a saved model, refusing weight files that are not an
    /// environment-to-voice regressor with intact normalization constants.
    pub fn load(path: &Path) -> Result<Self> {
        let model = load_weights(path)?;
        let bad = |detail: &str| EtvError::BadWeights(format!("{}: {detail}", path.display()));
        match model.extras.notes.get("model") {
            Some(kind) if kind == MODEL_KIND => {}
            Some(kind) => return Err(bad(&format!("model kind is {kind:?}"))),
            None => return Err(bad("missing model kind note")),
        }
        let expected_features = FEATURE_ORDER.join(",");
        match model.extras.notes.get("feature_order") {
            Some(order) if *order == expected_features => {}
            other => {
                return Err(bad(&format!(
                    "feature order {other:?} does not match {expected_features:?}"
                )))
            }
        }
        if model.specs() != layer_specs() {
            return Err(bad("layer stack does not match the regressor architecture"));
        }
        let vec_of = |name: &str, len: usize| -> Result<Vec<f64>> {
            let t = model
                .extras
                .tensors
                .get(name)
                .ok_or_else(|| bad(&format!("missing {name:?} tensor")))?;
            if t.shape() != [len] {
                return Err(bad(&format!(
                    "tensor {name:?} has shape {:?}, expected [{len}]",
                    t.shape()
                )));
            }
            if !t.all_finite() {
                return Err(bad(&format!("tensor {name:?} has non-finite entries")));
            }
            Ok(t.data().to_vec())
        };
        let input_mean: [f64; 5] = vec_of("input_mean", 5)?.try_into().unwrap();
        let input_std: [f64; 5] = vec_of("input_std", 5)?.try_into().unwrap();
        let output_min: [f64; 4] = vec_of("output_min", 4)?.try_into().unwrap();
        let output_max: [f64; 4] = vec_of("output_max", 4)?.try_into().unwrap();
        if input_std.iter().any(|s| *s <= 0.0) {
            return Err(bad("input_std must be strictly positive"));
        }
        if output_min
            .iter()
            .zip(output_max)
            .any(|(lo, hi)| *lo >= hi)
        {
            return Err(bad("output ranges must have min < max"));
        }
        Ok(EtvModel {
            model,
            input_mean,
            input_std,
            output_min,
            output_max,
        })
    }

    /// Z-scores a raw feature vector (order: [`FEATURE_ORDER`]).
    pub fn normalize_input(&self, features: [f64; 5]) -> [f64; 5] {
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = (features[i] - self.input_mean[i]) / self.input_std[i];
        }
        out
    }

    /// Min-max scales raw targets into [0, 1] (order: [`OUTPUT_ORDER`]).
    pub fn normalize_output(&self, targets: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = (targets[i] - self.output_min[i]) / (self.output_max[i] - self.output_min[i]);
        }
        out
    }

    /// Inverse of [`EtvModel::normalize_output`].
    pub fn denormalize_output(&self, scaled: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = self.output_min[i] + scaled[i] * (self.output_max[i] - self.output_min[i]);
        }
        out
    }

    /// Network output in normalized space for one raw feature vector.
    pub fn predict_normalized(&self, features: [f64; 5]) -> Result<[f64; 4]> {
        let x = self.normalize_input(features);
        let input = Tensor::from_vec(&[1, 5], x.to_vec()).expect("const shape");
        let output = self.model.forward(&input)?;
        let data = output.data();
        Ok([data[0], data[1], data[2], data[3]])
    }

    /// Mean squared error over tuples, in normalized space.
    pub fn mse(&self, tuples: &[InteractionTuple]) -> Result<f64> {
        if tuples.is_empty() {
            return Err(EtvError::Config("cannot score an empty tuple set".into()));
        }
        let (inputs, targets) = self.batch(tuples);
        let output = self.model.forward(&inputs)?;
        Ok(nn_core::mse(&output, &targets)?)
    }

    fn batch(&self, tuples: &[InteractionTuple]) -> (Tensor, Tensor) {
        let n = tuples.len();
        let mut x = Vec::with_capacity(n * 5);
        let mut y = Vec::with_capacity(n * 4);
        for t in tuples {
            x.extend_from_slice(&self.normalize_input(t.features()));
            y.extend_from_slice(&self.normalize_output(t.targets()));
        }
        (
            Tensor::from_vec(&[n, 5], x).expect("batch shape"),
            Tensor::from_vec(&[n, 4], y).expect("batch shape"),
        )
    }
}

/// Maps a scene to voice parameters: z-score the features, run the network,
/// undo the output scaling, and clamp into the valid parameter ranges.
pub fn adapt_voice(
    model: &EtvModel,
    env: &EnvironmentContext,
    profile: &UserProfile,
) -> Result<VoiceParameters> {
    let features = [
        env.annoyance,
        env.distance_cm,
        profile.english_cefr,
        profile.hearing_difficulty,
        env.t30_s,
    ];
    let scaled = model.predict_normalized(features)?;
    Ok(VoiceParameters::from_array_clamped(
        model.denormalize_output(scaled),
    ))
}

/// One epoch of the loss trajectory. `holdout_mse` is NaN when no tuples
/// were held out.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EtvEpochMetrics {
    pub epoch: usize,
    pub train_mse: f64,
    pub holdout_mse: f64,
}

/// Training result: the trained model, the loss trajectory, the final
/// normalized-space errors, and whether the run was cut short by divergence.
#[derive(Debug)]
pub struct EtvOutcome {
    pub model: EtvModel,
    pub history: Vec<EtvEpochMetrics>,
    pub final_train_mse: f64,
    pub holdout_mse: Option<f64>,
    pub n_train: usize,
    pub n_holdout: usize,
    pub diverged: bool,
}

/// Trains the regressor. Input z-score constants are computed from the
/// training portion only, so the held-out error is leak-free; output scaling
/// uses the fixed voice parameter ranges. A divergent update ends training
/// early with the parameters still finite (the optimizer rejects non-finite
/// steps before applying them).
pub fn train_etv(tuples: &[InteractionTuple], config: &EtvConfig) -> Result<EtvOutcome> {
    config.validate()?;
    if tuples.is_empty() {
        return Err(EtvError::Config("training needs at least one tuple".into()));
    }
    for t in tuples {
        t.validate()?;
    }

    let n = tuples.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);
    let n_holdout = ((n as f64) * config.holdout_fraction).round() as usize;
    let n_holdout = n_holdout.min(n.saturating_sub(1));
    let holdout: Vec<InteractionTuple> = order[..n_holdout]
        .iter()
        .map(|&i| tuples[i].clone())
        .collect();
    let train: Vec<InteractionTuple> = order[n_holdout..]
        .iter()
        .map(|&i| tuples[i].clone())
        .collect();

    // Per-feature z-score constants from the training portion. A feature
    // that is constant in training gets unit scale so normalization stays
    // well defined.
    let mut mean = [0.0; 5];
    for t in &train {
        for (m, x) in mean.iter_mut().zip(t.features()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= train.len() as f64);
    let mut var = [0.0; 5];
    for t in &train {
        for ((v, m), x) in var.iter_mut().zip(mean).zip(t.features()) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var.map(|v| {
        let s = (v / train.len() as f64).sqrt();
        if s > 1e-12 {
            s
        } else {
            1.0
        }
    });

    let mut model = Model::new(layer_specs())?;
    model.init_params(config.seed);
    let mut etv = EtvModel::from_parts(model, mean, std);
    let mut adam = AdamState::new(
        &etv.model,
        AdamConfig::with_learning_rate(config.learning_rate),
    );

    let mut history = Vec::with_capacity(config.epochs);
    let mut diverged = false;
    let mut train_order: Vec<usize> = (0..train.len()).collect();
    'epochs: for epoch in 0..config.epochs {
        let mut epoch_rng =
            ChaCha8Rng::seed_from_u64(config.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        train_order.shuffle(&mut epoch_rng);
        for chunk in train_order.chunks(config.batch_size) {
            let batch: Vec<InteractionTuple> =
                chunk.iter().map(|&i| train[i].clone()).collect();
            let (input, target) = etv.batch(&batch);
            let cache = match etv.model.forward_cached(&input, Phase::Train, 0) {
                Ok(cache) => cache,
                Err(NnError::NonFinite(_) | NnError::Diverged(_)) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e.into()),
            };
            let (loss, grads) = match etv.model.backward(&cache, &target) {
                Ok(pair) => pair,
                Err(NnError::NonFinite(_) | NnError::Diverged(_)) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e.into()),
            };
            if !loss.is_finite() {
                diverged = true;
                break 'epochs;
            }
            match adam.step(&mut etv.model, &grads) {
                Ok(()) => {}
                Err(NnError::Diverged(_)) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let train_mse = etv.mse(&train)?;
        let holdout_mse = if holdout.is_empty() {
            f64::NAN
        } else {
            etv.mse(&holdout)?
        };
        history.push(EtvEpochMetrics {
            epoch,
            train_mse,
            holdout_mse,
        });
    }

    let final_train_mse = etv.mse(&train)?;
    let holdout_mse = if holdout.is_empty() {
        None
    } else {
        Some(etv.mse(&holdout)?)
    };
    Ok(EtvOutcome {
        model: etv,
        history,
        final_train_mse,
        holdout_mse,
        n_train: train.len(),
        n_holdout: holdout.len(),
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple(ar: f64, dist: f64, t30: f64, voice: VoiceParameters) -> InteractionTuple {
        InteractionTuple {
            subject_id: "s1".into(),
            word_id: "w1".into(),
            voice,
            env: EnvironmentContext::new(ar, dist, t30).unwrap(),
            profile: UserProfile::new(2.0, 3.0).unwrap(),
            phonetic_similarity: 1.0,
            ux: 7.0,
        }
    }

    fn sample_tuples(n: usize) -> Vec<InteractionTuple> {
        (0..n)
            .map(|i| {
                let f = i as f64 / n.max(2) as f64;
                tuple(
                    1.0 + 9.0 * f,
                    60.0 + 440.0 * f,
                    0.04 + 0.74 * f,
                    VoiceParameters::clamped(2.0 * f, 0.5 + 1.5 * f, 0.4 + 3.6 * f, 4.0 * f),
                )
            })
            .collect()
    }

    #[test]
    fn normalization_round_trips_to_within_1e9() {
        let out = train_etv(
            &sample_tuples(20),
            &EtvConfig {
                epochs: 1,
                ..EtvConfig::default()
            },
        )
        .unwrap();
        let m = &out.model;
        for t in sample_tuples(20) {
            let f = t.features();
            let z = m.normalize_input(f);
            for i in 0..5 {
                let back = z[i] * m.input_std[i] + m.input_mean[i];
                assert!((back - f[i]).abs() < 1e-9);
            }
            let y = t.targets();
            let s = m.normalize_output(y);
            let back = m.denormalize_output(s);
            for i in 0..4 {
                assert!((back[i] - y[i]).abs() < 1e-9);
                assert!((-1e-9..=1.0 + 1e-9).contains(&s[i]));
            }
        }
    }

    #[test]
    fn holdout_split_sizes_follow_the_fraction() {
        let out = train_etv(
            &sample_tuples(40),
            &EtvConfig {
                epochs: 1,
                ..EtvConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out.n_holdout, 4);
        assert_eq!(out.n_train, 36);
        assert!(out.holdout_mse.is_some());
        let out = train_etv(
            &sample_tuples(10),
            &EtvConfig {
                epochs: 1,
                holdout_fraction: 0.0,
                ..EtvConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out.n_holdout, 0);
        assert!(out.holdout_mse.is_none());
        assert!(out.history[0].holdout_mse.is_nan());
    }

    #[test]
    fn rejects_bad_configs_and_empty_input() {
        let bad = |c: EtvConfig| train_etv(&sample_tuples(4), &c);
        assert!(bad(EtvConfig {
            learning_rate: 0.0,
            ..EtvConfig::default()
        })
        .is_err());
        assert!(bad(EtvConfig {
            epochs: 0,
            ..EtvConfig::default()
        })
        .is_err());
        assert!(bad(EtvConfig {
            holdout_fraction: 1.0,
            ..EtvConfig::default()
        })
        .is_err());
        assert!(matches!(
            train_etv(&[], &EtvConfig::default()),
            Err(EtvError::Config(_))
        ));
    }

    #[test]
    fn save_load_round_trip_preserves_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("etv.bin");
        let out = train_etv(
            &sample_tuples(20),
            &EtvConfig {
                epochs: 3,
                ..EtvConfig::default()
            },
        )
        .unwrap();
        out.model.save(&path).unwrap();
        let loaded = EtvModel::load(&path).unwrap();
        let env = EnvironmentContext::new(6.0, 150.0, 0.3).unwrap();
        let profile = UserProfile::new(2.0, 4.0).unwrap();
        let a = adapt_voice(&out.model, &env, &profile).unwrap();
        let b = adapt_voice(&loaded, &env, &profile).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn foreign_weight_files_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("other.bin");
        // Same architecture, but no normalization constants or kind note.
        let mut model = Model::new(layer_specs()).unwrap();
        model.init_params(1);
        save_weights(&model, &path).unwrap();
        assert!(matches!(
            EtvModel::load(&path),
            Err(EtvError::BadWeights(_))
        ));

        // Right notes, wrong architecture.
        let path2 = dir.path().join("smaller.bin");
        let mut small = Model::new(vec![LayerSpec::FullyConnected {
            in_features: 5,
            out_features: 4,
        }])
        .unwrap();
        small.init_params(1);
        let mut etv = EtvModel::from_parts(small, [0.0; 5], [1.0; 5]);
        etv.write_extras();
        save_weights(&etv.model, &path2).unwrap();
        assert!(matches!(
            EtvModel::load(&path2),
            Err(EtvError::BadWeights(_))
        ));
    }

    #[test]
    fn adaptation_is_deterministic() {
        let out = train_etv(
            &sample_tuples(20),
            &EtvConfig {
                epochs: 2,
                ..EtvConfig::default()
            },
        )
        .unwrap();
        let env = EnvironmentContext::new(3.0, 100.0, 0.2).unwrap();
        let profile = UserProfile::new(1.0, 5.0).unwrap();
        let a = adapt_voice(&out.model, &env, &profile).unwrap();
        let b = adapt_voice(&out.model, &env, &profile).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
    }
}
