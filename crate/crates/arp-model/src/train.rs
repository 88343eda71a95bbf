//! Mini-batch training with Adam, best-validation checkpointing, and
//! divergence recovery.

use std::collections::BTreeMap;

use audio_dsp::{extract_log_mel, read_wav, FeatureConfig};
use nn_core::{AdamConfig, AdamState, Model, NnError, Phase, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{build_arp, spectrogram_tensor, ArpConfig, ArpError, DeltaDataset, Result};

/// Knobs that vary between runs of the same configuration.
#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    /// Seeds parameter init, epoch shuffles, and dropout masks.
    pub seed: u64,
    /// Destroys the learning signal by re-permuting the training labels
    /// every epoch. Used as a negative control: validation error should
    /// stay at chance level.
    pub shuffle_labels: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            seed: 0,
            shuffle_labels: false,
        }
    }
}

/// Loss trajectory entry; `val_mse` is NaN when there is no validation split.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

/// The trained model plus everything needed to judge the run.
#[derive(Debug)]
pub struct TrainOutcome {
    /// The checkpoint with the best validation MSE (best training MSE when
    /// there is no validation split).
    pub model: Model,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    /// Test-split metrics from the selected checkpoint; None without a
    /// test split.
    pub test_mse: Option<f64>,
    pub test_mae: Option<f64>,
    /// True when training hit a non-finite loss or gradient and stopped
    /// early; `model` is then the last good checkpoint.
    pub diverged: bool,
}

/// In-memory spectrogram bank: every clip in the dataset, extracted once.
struct FeatureBank {
    frames: usize,
    mels: usize,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl FeatureBank {
    fn load(dataset: &DeltaDataset) -> Result<Self> {
        let feature_config = FeatureConfig::default();
        let mut rows = BTreeMap::new();
        let mut dims: Option<(usize, usize)> = None;
        let used: Vec<usize> = dataset
            .train
            .iter()
            .chain(&dataset.val)
            .chain(&dataset.test)
            .copied()
            .collect();
        for idx in used {
            let clip = read_wav(&dataset.clip_path(idx))?;
            let logmel = extract_log_mel(&clip, &feature_config)?;
            // Runs the same minimum-size check as inference.
            spectrogram_tensor(&logmel)?;
            match dims {
                None => dims = Some((logmel.frames, logmel.n_mels)),
                Some((frames, _)) if frames != logmel.frames => {
                    return Err(ArpError::FrameMismatch {
                        expected: frames,
                        got: logmel.frames,
                        file: dataset.records[idx].file.clone(),
                    });
                }
                Some(_) => {}
            }
            rows.insert(idx, logmel.data);
        }
        let (frames, mels) = dims.ok_or(ArpError::EmptySplit("train"))?;
        Ok(FeatureBank { frames, mels, rows })
    }

    fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(indices.len() * self.frames * self.mels);
        for &idx in indices {
            data.extend_from_slice(&self.rows[&idx]);
        }
        Ok(Tensor::from_vec(
            &[indices.len(), 1, self.frames, self.mels],
            data,
        )?)
    }
}

fn target_tensor(labels: &[f64]) -> Result<Tensor> {
    Ok(Tensor::from_vec(&[labels.len(), 1], labels.to_vec())?)
}

/// Eval-mode MSE and MAE over a split, batched for memory.
fn evaluate_split(
    model: &Model,
    bank: &FeatureBank,
    dataset: &DeltaDataset,
    split: &[usize],
    batch_size: usize,
) -> Result<(f64, f64)> {
    let mut sq_sum = 0.0;
    let mut abs_sum = 0.0;
    for chunk in split.chunks(batch_size) {
        let input = bank.batch(chunk)?;
        let output = model.forward(&input)?;
        for (pred, &idx) in output.data().iter().zip(chunk) {
            let err = pred - dataset.records[idx].annoyance;
            sq_sum += err * err;
            abs_sum += err.abs();
        }
    }
    let n = split.len() as f64;
    Ok((sq_sum / n, abs_sum / n))
}

/// Trains the network on the dataset's train split, checkpointing on the
/// validation split and reporting test metrics from the best checkpoint.
///
/// The run is a pure function of (dataset, config, options): parameter
/// init, epoch shuffles, dropout masks, and the label-shuffle control all
/// derive from `options.seed`.
pub fn train_arp(
    dataset: &DeltaDataset,
    config: &ArpConfig,
    options: &TrainOptions,
) -> Result<TrainOutcome> {
    config.validate()?;
    dataset.validate()?;
    let bank = FeatureBank::load(dataset)?;

    let mut model = build_arp(config, options.seed)?;
    let mut adam = AdamState::new(&model, AdamConfig::with_learning_rate(config.learning_rate));

    let track_val = !dataset.val.is_empty();
    let mut best: Option<(usize, f64, Model)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    let mut diverged = false;
    let mut step: u64 = 0;

    'epochs: for epoch in 0..config.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(options.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));

        let mut order = dataset.train.clone();
        order.shuffle(&mut rng);

        // The control permutes labels against clips fresh each epoch so no
        // stable mapping exists to memorize.
        let mut labels: BTreeMap<usize, f64> = dataset
            .train
            .iter()
            .map(|&i| (i, dataset.records[i].annoyance))
            .collect();
        if options.shuffle_labels {
            let keys: Vec<usize> = labels.keys().copied().collect();
            let mut values: Vec<f64> = keys.iter().map(|k| labels[k]).collect();
            values.shuffle(&mut rng);
            for (k, v) in keys.into_iter().zip(values) {
                labels.insert(k, v);
            }
        }

        let mut sq_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let input = bank.batch(chunk)?;
            let target_vals: Vec<f64> = chunk.iter().map(|i| labels[i]).collect();
            let target = target_tensor(&target_vals)?;

            step += 1;
            let dropout_seed = options.seed ^ step.wrapping_mul(0x517C_C1B7_2722_0A95);
            // A non-finite loss or gradient means the run has diverged; the
            // failed step never touches the parameters, so the model still
            // holds the last good state.
            let cache = match model.forward_cached(&input, Phase::Train, dropout_seed) {
                Ok(cache) => cache,
                Err(NnError::NonFinite(_) | NnError::Diverged(_)) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e.into()),
            };
            let (loss, grads) = match model.backward(&cache, &target) {
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
            match adam.step(&mut model, &grads) {
                Ok(()) => {}
                Err(NnError::Diverged(_)) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e.into()),
            }
            model.update_running_stats(&cache);
            sq_sum += loss * chunk.len() as f64;
        }
        let train_mse = sq_sum / dataset.train.len() as f64;

        let val_mse = if track_val {
            evaluate_split(&model, &bank, dataset, &dataset.val, config.batch_size)?.0
        } else {
            f64::NAN
        };
        history.push(EpochMetrics {
            epoch,
            train_mse,
            val_mse,
        });

        let selection = if track_val { val_mse } else { train_mse };
        let improved = match &best {
            None => true,
            Some((_, incumbent, _)) => selection < *incumbent,
        };
        if improved && selection.is_finite() {
            best = Some((epoch, selection, model.clone()));
        }
    }

    let (best_epoch, best_val_mse, model) = match best {
        Some(b) => b,
        // Divergence before any epoch finished: fall back to the current
        // parameters, which the failed update never touched.
        None => (0, f64::NAN, model),
    };

    let (test_mse, test_mae) = if dataset.test.is_empty() {
        (None, None)
    } else {
        let (mse, mae) =
            evaluate_split(&model, &bank, dataset, &dataset.test, config.batch_size)?;
        (Some(mse), Some(mae))
    };

    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_mse,
        test_mse,
        test_mae,
        diverged,
    })
}
