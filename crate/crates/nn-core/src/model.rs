//! A model is an ordered layer stack with parameters, plus the forward and
//! reverse passes over it. The loss is mean squared error over all output
//! elements.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::layer::{
    avg_pool_backward, avg_pool_forward, batch_norm_backward_eval, batch_norm_backward_train,
    batch_norm_forward, batch_stats, conv2d_backward, conv2d_forward, dropout_backward,
    dropout_forward, fully_connected_backward, fully_connected_forward, global_avg_pool_backward,
    global_avg_pool_forward, relu_backward, relu_forward, simulate_shapes, Layer, LayerAux,
    LayerSpec, Phase,
};
use crate::tensor::Tensor;
use crate::{NnError, Result};

/// Free-form metadata persisted alongside the weights: named constant
/// tensors (e.g. input normalization statistics) and human-readable notes
/// (e.g. the expected input feature order).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelExtras {
    pub tensors: BTreeMap<String, Tensor>,
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub layers: Vec<Layer>,
    pub extras: ModelExtras,
}

/// Values captured by a cached forward pass: every inter-layer activation
/// plus per-layer auxiliaries (batch statistics, dropout masks).
pub struct ForwardCache {
    pub phase: Phase,
    /// `activations[0]` is the model input; `activations[i + 1]` is the
    /// output of layer `i`.
    pub activations: Vec<Tensor>,
    pub aux: Vec<LayerAux>,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("cache holds the input at minimum")
    }
}

/// Per-layer gradient tensors for trainable parameters, aligned with the
/// order of [`Model::trainable_params`].
pub struct Gradients {
    pub layers: Vec<Vec<(&'static str, Tensor)>>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| l.iter().map(|(_, t)| t))
            .collect()
    }
}

impl Model {
    /// Builds a model from layer specs with zeroed parameters (batch-norm
    /// scale and running variance start at one). Channel chaining across
    /// layers is checked; spatial sizes are validated per forward pass.
    pub fn new(specs: Vec<LayerSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(NnError::InvalidSpec("a model needs at least one layer".into()));
        }
        let layers = specs
            .into_iter()
            .map(Layer::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            extras: ModelExtras::default(),
        })
    }

    /// Kaiming-uniform initialization of conv / fully-connected weights
    /// (bounds ±√(6 / fan_in)), zero biases, identity batch-norm.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            let fan_in = match layer.spec {
                LayerSpec::Conv2d {
                    in_channels, kernel, ..
                } => Some(in_channels * kernel.0 * kernel.1),
                LayerSpec::FullyConnected { in_features, .. } => Some(in_features),
                _ => None,
            };
            if let Some(fan_in) = fan_in {
                let bound = (6.0 / fan_in as f64).sqrt();
                for v in layer.param_mut("weight").data_mut() {
                    *v = rng.gen_range(-bound..bound);
                }
                for v in layer.param_mut("bias").data_mut() {
                    *v = 0.0;
                }
            }
        }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    /// Simulates the activation shapes this model produces for `input_shape`.
    pub fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let shapes = simulate_shapes(&self.specs(), input_shape)?;
        Ok(shapes.last().cloned().unwrap_or_else(|| input_shape.to_vec()))
    }

    /// Inference-phase forward pass: batch-norm uses running statistics and
    /// dropout is a no-op.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let mut current = input.clone();
        self.check_input(input)?;
        for (idx, layer) in self.layers.iter().enumerate() {
            let (out, _) = self.layer_forward(idx, layer, &current, Phase::Eval, 0)?;
            current = out;
        }
        Ok(current)
    }

    /// Forward pass that records everything the backward pass needs.
    /// In [`Phase::Train`], batch-norm normalizes with batch statistics
    /// (without touching the stored running statistics; see
    /// [`Model::update_running_stats`]) and dropout draws masks from
    /// `dropout_seed`, so the pass is a pure function of its arguments.
    pub fn forward_cached(
        &self,
        input: &Tensor,
        phase: Phase,
        dropout_seed: u64,
    ) -> Result<ForwardCache> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut aux = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for (idx, layer) in self.layers.iter().enumerate() {
            let (out, a) =
                self.layer_forward(idx, layer, activations.last().unwrap(), phase, dropout_seed)?;
            activations.push(out);
            aux.push(a);
        }
        Ok(ForwardCache {
            phase,
            activations,
            aux,
        })
    }

    /// Loss-only forward, avoiding activation clones. Used by the gradient
    /// checker, which evaluates the loss thousands of times.
    pub fn loss_only(
        &self,
        input: &Tensor,
        target: &Tensor,
        phase: Phase,
        dropout_seed: u64,
    ) -> Result<f64> {
        self.check_input(input)?;
        let mut current = input.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            let (out, _) = self.layer_forward(idx, layer, &current, phase, dropout_seed)?;
            current = out;
        }
        mse(&current, target)
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if !input.all_finite() {
            return Err(NnError::NonFinite("model input"));
        }
        Ok(())
    }

    fn layer_forward(
        &self,
        idx: usize,
        layer: &Layer,
        input: &Tensor,
        phase: Phase,
        dropout_seed: u64,
    ) -> Result<(Tensor, LayerAux)> {
        let out_shape = layer
            .spec
            .output_shape(input.shape())
            .map_err(|e| NnError::ShapeMismatch {
                layer: idx,
                kind: layer.spec.kind(),
                detail: e.to_string(),
            })?;
        let result = match layer.spec {
            LayerSpec::Conv2d {
                kernel,
                stride,
                padding,
                ..
            } => (
                conv2d_forward(
                    input,
                    layer.param("weight"),
                    layer.param("bias"),
                    kernel,
                    stride,
                    padding,
                    &out_shape,
                ),
                LayerAux::None,
            ),
            LayerSpec::FullyConnected { .. } => (
                fully_connected_forward(input, layer.param("weight"), layer.param("bias")),
                LayerAux::None,
            ),
            LayerSpec::BatchNorm { epsilon, .. } => match phase {
                Phase::Train => {
                    let (mean, var) = batch_stats(input);
                    let out = batch_norm_forward(
                        input,
                        layer.param("scale"),
                        layer.param("shift"),
                        &mean,
                        &var,
                        epsilon,
                    );
                    (out, LayerAux::BatchStats { mean, var })
                }
                Phase::Eval => {
                    let mean = layer.param("running_mean").data().to_vec();
                    let var = layer.param("running_var").data().to_vec();
                    let out = batch_norm_forward(
                        input,
                        layer.param("scale"),
                        layer.param("shift"),
                        &mean,
                        &var,
                        epsilon,
                    );
                    (out, LayerAux::BatchStats { mean, var })
                }
            },
            LayerSpec::Relu => (relu_forward(input), LayerAux::None),
            LayerSpec::AvgPool2d { size, stride } => (
                avg_pool_forward(input, size, stride, &out_shape),
                LayerAux::None,
            ),
            LayerSpec::GlobalAvgPool => (global_avg_pool_forward(input), LayerAux::None),
            LayerSpec::Dropout { p } => match phase {
                Phase::Train if p > 0.0 => {
                    // Each dropout layer draws from its own deterministic
                    // stream so masks do not shift when layers are added.
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(dropout_seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let mask: Vec<f64> = (0..input.len())
                        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { 1.0 })
                        .collect();
                    let out = dropout_forward(input, &mask, p);
                    (out, LayerAux::DropoutMask { mask })
                }
                _ => (input.clone(), LayerAux::None),
            },
        };
        Ok(result)
    }

    /// Mean-squared-error loss and parameter gradients for the cached pass.
    /// Returns the loss value alongside per-layer gradients for every
    /// trainable parameter.
    pub fn backward(&self, cache: &ForwardCache, target: &Tensor) -> Result<(f64, Gradients)> {
        let output = cache.output();
        let loss = mse(output, target)?;
        let n = output.len() as f64;
        let mut grad = Tensor::zeros(output.shape());
        for ((g, y), t) in grad
            .data_mut()
            .iter_mut()
            .zip(output.data())
            .zip(target.data())
        {
            *g = 2.0 * (y - t) / n;
        }

        let mut layer_grads: Vec<Vec<(&'static str, Tensor)>> = vec![Vec::new(); self.layers.len()];
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let input = &cache.activations[idx];
            grad = match layer.spec {
                LayerSpec::Conv2d {
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    let grads = conv2d_backward(
                        input,
                        layer.param("weight"),
                        &grad,
                        kernel,
                        stride,
                        padding,
                    );
                    layer_grads[idx].push(("weight", grads.grad_weight));
                    layer_grads[idx].push(("bias", grads.grad_bias));
                    grads.grad_input
                }
                LayerSpec::FullyConnected { .. } => {
                    let grads = fully_connected_backward(input, layer.param("weight"), &grad);
                    layer_grads[idx].push(("weight", grads.grad_weight));
                    layer_grads[idx].push(("bias", grads.grad_bias));
                    grads.grad_input
                }
                LayerSpec::BatchNorm { epsilon, .. } => {
                    let LayerAux::BatchStats { mean, var } = &cache.aux[idx] else {
                        return Err(NnError::InvalidSpec(
                            "batch_norm cache entry missing statistics".into(),
                        ));
                    };
                    let grads = match cache.phase {
                        Phase::Train => batch_norm_backward_train(
                            input,
                            layer.param("scale"),
                            &grad,
                            mean,
                            var,
                            epsilon,
                        ),
                        Phase::Eval => batch_norm_backward_eval(
                            input,
                            layer.param("scale"),
                            &grad,
                            mean,
                            var,
                            epsilon,
                        ),
                    };
                    layer_grads[idx].push(("scale", grads.grad_scale));
                    layer_grads[idx].push(("shift", grads.grad_shift));
                    grads.grad_input
                }
                LayerSpec::Relu => relu_backward(input, &grad),
                LayerSpec::AvgPool2d { size, stride } => {
                    avg_pool_backward(input.shape(), &grad, size, stride)
                }
                LayerSpec::GlobalAvgPool => global_avg_pool_backward(input.shape(), &grad),
                LayerSpec::Dropout { p } => match &cache.aux[idx] {
                    LayerAux::DropoutMask { mask } => dropout_backward(&grad, mask, p),
                    _ => grad,
                },
            };
        }
        Ok((loss, Gradients { layers: layer_grads }))
    }

    /// Folds cached batch statistics into the stored running statistics:
    /// `running ← (1 − momentum)·running + momentum·batch`. The running
    /// variance uses the unbiased batch variance.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            let LayerSpec::BatchNorm { momentum, .. } = layer.spec else {
                continue;
            };
            let LayerAux::BatchStats { mean, var } = &cache.aux[idx] else {
                continue;
            };
            let input_shape = cache.activations[idx].shape();
            let m = (input_shape[0] * input_shape[2] * input_shape[3]) as f64;
            let correction = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
            {
                let rm = layer.param_mut("running_mean");
                for (r, b) in rm.data_mut().iter_mut().zip(mean) {
                    *r = (1.0 - momentum) * *r + momentum * b;
                }
            }
            let rv = layer.param_mut("running_var");
            for (r, b) in rv.data_mut().iter_mut().zip(var) {
                *r = (1.0 - momentum) * *r + momentum * b * correction;
            }
        }
    }

    /// Trainable parameters in optimizer order (layer order, then the
    /// layer's declared parameter order).
    pub fn trainable_params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| l.params.iter().filter(|p| p.trainable).map(|p| &p.value))
            .collect()
    }

    pub fn trainable_params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                l.params
                    .iter_mut()
                    .filter(|p| p.trainable)
                    .map(|p| &mut p.value)
            })
            .collect()
    }

    pub fn num_trainable_params(&self) -> usize {
        self.trainable_params().iter().map(|t| t.len()).sum()
    }
}

/// Mean squared error over all elements.
pub fn mse(output: &Tensor, target: &Tensor) -> Result<f64> {
    if output.shape() != target.shape() {
        return Err(NnError::InvalidSpec(format!(
            "loss target shape {:?} does not match output shape {:?}",
            target.shape(),
            output.shape()
        )));
    }
    let n = output.len() as f64;
    let loss = output
        .data()
        .iter()
        .zip(target.data())
        .map(|(y, t)| (y - t).powi(2))
        .sum::<f64>()
        / n;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("loss"));
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mlp() -> Model {
        let mut model = Model::new(vec![
            LayerSpec::FullyConnected {
                in_features: 3,
                out_features: 4,
            },
            LayerSpec::Relu,
            LayerSpec::FullyConnected {
                in_features: 4,
                out_features: 2,
            },
        ])
        .unwrap();
        model.init_params(7);
        model
    }

    #[test]
    fn forward_rejects_non_finite_input() {
        let model = mlp();
        let input = Tensor::from_vec(&[1, 3], vec![1.0, f64::NAN, 0.0]).unwrap();
        assert!(matches!(
            model.forward(&input),
            Err(NnError::NonFinite("model input"))
        ));
    }

    #[test]
    fn mlp_matches_dense_algebra() {
        // Compute the same two-layer ReLU network by hand.
        let model = mlp();
        let input = Tensor::from_vec(&[2, 3], vec![0.5, -1.0, 2.0, 0.0, 0.25, -0.75]).unwrap();
        let out = model.forward(&input).unwrap();

        let w1 = model.layers[0].param("weight");
        let b1 = model.layers[0].param("bias");
        let w2 = model.layers[2].param("weight");
        let b2 = model.layers[2].param("bias");
        for sample in 0..2 {
            let x = &input.data()[sample * 3..(sample + 1) * 3];
            let mut h = [0.0; 4];
            for (o, hv) in h.iter_mut().enumerate() {
                let mut acc = b1.data()[o];
                for (i, xv) in x.iter().enumerate() {
                    acc += w1.data()[o * 3 + i] * xv;
                }
                *hv = acc.max(0.0);
            }
            for o in 0..2 {
                let mut acc = b2.data()[o];
                for (i, hv) in h.iter().enumerate() {
                    acc += w2.data()[o * 4 + i] * hv;
                }
                let got = out.data()[sample * 2 + o];
                assert!((got - acc).abs() < 1e-12, "sample {sample} unit {o}");
            }
        }
    }

    #[test]
    fn zero_error_yields_zero_gradients() {
        // When the target equals the output, every gradient is exactly zero.
        let model = mlp();
        let input = Tensor::from_vec(&[1, 3], vec![0.3, -0.2, 0.9]).unwrap();
        let target = model.forward(&input).unwrap();
        let cache = model.forward_cached(&input, Phase::Eval, 0).unwrap();
        let (loss, grads) = model.backward(&cache, &target).unwrap();
        assert_eq!(loss, 0.0);
        for g in grads.flat() {
            assert!(g.data().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn dropout_keeps_expected_fraction_and_scales() {
        let model = Model::new(vec![LayerSpec::Dropout { p: 0.25 }]).unwrap();
        let input = Tensor::filled(&[1, 40_000], 1.0);
        let cache = model.forward_cached(&input, Phase::Train, 99).unwrap();
        let out = cache.output();
        let kept = out.data().iter().filter(|v| **v > 0.0).count();
        let frac = kept as f64 / out.len() as f64;
        assert!((frac - 0.75).abs() < 0.01, "kept fraction {frac}");
        // Kept units are scaled by 1/(1-p).
        for v in out.data() {
            assert!(*v == 0.0 || (*v - 1.0 / 0.75).abs() < 1e-12);
        }
        // Same seed → same mask; different seed → different mask.
        let cache2 = model.forward_cached(&input, Phase::Train, 99).unwrap();
        assert_eq!(cache2.output().data(), out.data());
        let cache3 = model.forward_cached(&input, Phase::Train, 100).unwrap();
        assert_ne!(cache3.output().data(), out.data());
        // Eval phase is the identity.
        let eval = model.forward(&input).unwrap();
        assert_eq!(eval.data(), input.data());
    }

    #[test]
    fn batch_norm_train_normalizes_batch() {
        let model = Model::new(vec![LayerSpec::BatchNorm {
            channels: 2,
            epsilon: 1e-5,
            momentum: 0.1,
        }])
        .unwrap();
        let input = Tensor::from_vec(
            &[2, 2, 1, 2],
            vec![1.0, 2.0, 10.0, 20.0, 3.0, 4.0, 30.0, 40.0],
        )
        .unwrap();
        let cache = model.forward_cached(&input, Phase::Train, 0).unwrap();
        let out = cache.output();
        // Each channel of the output has (near) zero mean and unit variance.
        for ch in 0..2 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|s| {
                    let base = (s * 2 + ch) * 2;
                    out.data()[base..base + 2].to_vec()
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / 4.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn running_stats_converge_to_batch_stats() {
        let mut model = Model::new(vec![LayerSpec::BatchNorm {
            channels: 1,
            epsilon: 1e-5,
            momentum: 0.5,
        }])
        .unwrap();
        let input = Tensor::from_vec(&[1, 1, 1, 4], vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        for _ in 0..64 {
            let cache = model.forward_cached(&input, Phase::Train, 0).unwrap();
            model.update_running_stats(&cache);
        }
        let rm = model.layers[0].param("running_mean").data()[0];
        let rv = model.layers[0].param("running_var").data()[0];
        assert!((rm - 5.0).abs() < 1e-6);
        // Unbiased variance of {2,4,6,8} is 20/3.
        assert!((rv - 20.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn global_pool_then_fc_shapes() {
        let model = Model::new(vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 3,
                kernel: (3, 3),
                stride: 1,
                padding: (1, 1),
            },
            LayerSpec::GlobalAvgPool,
            LayerSpec::FullyConnected {
                in_features: 3,
                out_features: 1,
            },
        ])
        .unwrap();
        assert_eq!(model.output_shape(&[2, 1, 8, 8]).unwrap(), vec![2, 1]);
    }
}
