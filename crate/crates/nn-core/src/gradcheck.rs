//! Central-difference gradient verification.
//!
//! Perturbs every trainable parameter element by ±h, re-evaluates the loss,
//! and compares the numeric slope against the reverse-mode gradient.

use crate::layer::Phase;
use crate::model::Model;
use crate::tensor::Tensor;
use crate::Result;

/// Relative-error floor: errors are measured against
/// `max(|analytic|, |numeric|, MAGNITUDE_FLOOR)` so that near-zero gradients
/// are compared absolutely, below the noise of central differences.
pub const MAGNITUDE_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// `(layer index, parameter name, element index)` of the worst element.
    pub worst: Option<(usize, String, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err <= tolerance
    }
}

/// Checks every trainable parameter of `model` against central finite
/// differences with step `h` on the mean-squared-error loss.
///
/// The check runs in [`Phase::Train`] with a fixed dropout seed so the loss
/// is a deterministic function of the parameters; models under test should
/// use dropout probability 0 (otherwise dropped units legitimately carry
/// zero gradient and the check only covers the kept ones).
pub fn check_gradients(
    model: &Model,
    input: &Tensor,
    target: &Tensor,
    h: f64,
    dropout_seed: u64,
) -> Result<GradCheckReport> {
    let cache = model.forward_cached(input, Phase::Train, dropout_seed)?;
    let (_, grads) = model.backward(&cache, target)?;

    let mut probe = model.clone();
    let mut max_rel_err = 0.0_f64;
    let mut worst = None;
    let mut checked = 0usize;

    for (layer_idx, layer) in model.layers.iter().enumerate() {
        for param in layer.params.iter().filter(|p| p.trainable) {
            let grad_tensor = grads.layers[layer_idx]
                .iter()
                .find(|(name, _)| *name == param.name)
                .map(|(_, t)| t)
                .expect("backward produced a gradient for every trainable parameter");
            for elem in 0..param.value.len() {
                let original = param.value.data()[elem];
                let set = |probe: &mut Model, v: f64| {
                    probe.layers[layer_idx]
                        .param_mut(param.name)
                        .data_mut()[elem] = v;
                };
                set(&mut probe, original + h);
                let loss_plus = probe.loss_only(input, target, Phase::Train, dropout_seed)?;
                set(&mut probe, original - h);
                let loss_minus = probe.loss_only(input, target, Phase::Train, dropout_seed)?;
                set(&mut probe, original);

                let numeric = (loss_plus - loss_minus) / (2.0 * h);
                let analytic = grad_tensor.data()[elem];
                let denom = analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
                let rel = (analytic - numeric).abs() / denom;
                checked += 1;
                if rel > max_rel_err {
                    max_rel_err = rel;
                    worst = Some((layer_idx, param.name.to_string(), elem));
                }
            }
        }
    }

    Ok(GradCheckReport {
        max_rel_err,
        checked,
        worst,
    })
}
