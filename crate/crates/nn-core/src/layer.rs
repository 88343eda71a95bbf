//! Layer specifications and their forward/backward implementations.
//!
//! Activations flow as `[batch, channels, height, width]` through the
//! convolutional stages and as `[batch, features]` once `global_avg_pool`
//! has collapsed the spatial dims. Convolution is evaluated as im2col
//! followed by a GEMM.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::{NnError, Result};

/// Architecture description of a single layer. Serialized verbatim into the
/// weight-file header, so the field layout is part of the on-disk format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: (usize, usize),
    },
    FullyConnected {
        in_features: usize,
        out_features: usize,
    },
    BatchNorm {
        channels: usize,
        epsilon: f64,
        momentum: f64,
    },
    Relu,
    AvgPool2d {
        size: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Dropout {
        p: f64,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::FullyConnected { .. } => "fully_connected",
            LayerSpec::BatchNorm { .. } => "batch_norm",
            LayerSpec::Relu => "relu",
            LayerSpec::AvgPool2d { .. } => "avg_pool2d",
            LayerSpec::GlobalAvgPool => "global_avg_pool",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                if in_channels == 0 || out_channels == 0 || kernel.0 == 0 || kernel.1 == 0 {
                    return Err(NnError::InvalidSpec(
                        "conv2d dimensions must be nonzero".into(),
                    ));
                }
                if stride == 0 {
                    return Err(NnError::InvalidSpec("conv2d stride must be nonzero".into()));
                }
            }
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => {
                if in_features == 0 || out_features == 0 {
                    return Err(NnError::InvalidSpec(
                        "fully_connected dimensions must be nonzero".into(),
                    ));
                }
            }
            LayerSpec::BatchNorm {
                channels,
                epsilon,
                momentum,
            } => {
                if channels == 0 {
                    return Err(NnError::InvalidSpec(
                        "batch_norm channels must be nonzero".into(),
                    ));
                }
                if !(epsilon > 0.0) {
                    return Err(NnError::InvalidSpec(
                        "batch_norm epsilon must be positive".into(),
                    ));
                }
                if !(0.0..=1.0).contains(&momentum) {
                    return Err(NnError::InvalidSpec(
                        "batch_norm momentum must lie in [0, 1]".into(),
                    ));
                }
            }
            LayerSpec::AvgPool2d { size, stride } => {
                if size == 0 || stride == 0 {
                    return Err(NnError::InvalidSpec(
                        "avg_pool2d size and stride must be nonzero".into(),
                    ));
                }
            }
            LayerSpec::Dropout { p } => {
                if !(0.0..1.0).contains(&p) {
                    return Err(NnError::InvalidSpec(format!(
                        "dropout probability {p} must lie in [0, 1)"
                    )));
                }
            }
            LayerSpec::Relu | LayerSpec::GlobalAvgPool => {}
        }
        Ok(())
    }

    /// Parameter names, shapes and trainability for this layer, in the fixed
    /// order used by the optimizer and the weight file.
    pub fn param_specs(&self) -> Vec<(&'static str, Vec<usize>, bool)> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                ("weight", vec![out_channels, in_channels, kernel.0, kernel.1], true),
                ("bias", vec![out_channels], true),
            ],
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => vec![
                ("weight", vec![out_features, in_features], true),
                ("bias", vec![out_features], true),
            ],
            LayerSpec::BatchNorm { channels, .. } => vec![
                ("scale", vec![channels], true),
                ("shift", vec![channels], true),
                ("running_mean", vec![channels], false),
                ("running_var", vec![channels], false),
            ],
            _ => Vec::new(),
        }
    }

    /// Output shape for a given input shape, or a descriptive error when the
    /// input is incompatible.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let [n, c, h, w] = expect_rank4(input, "conv2d")?;
                if c != in_channels {
                    return Err(NnError::InvalidSpec(format!(
                        "conv2d expects {in_channels} input channels, got {c}"
                    )));
                }
                let ph = h + 2 * padding.0;
                let pw = w + 2 * padding.1;
                if ph < kernel.0 || pw < kernel.1 {
                    return Err(NnError::InvalidSpec(format!(
                        "conv2d kernel {:?} exceeds padded input {ph}x{pw}",
                        kernel
                    )));
                }
                let oh = (ph - kernel.0) / stride + 1;
                let ow = (pw - kernel.1) / stride + 1;
                Ok(vec![n, out_channels, oh, ow])
            }
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => {
                let [n, f] = expect_rank2(input, "fully_connected")?;
                if f != in_features {
                    return Err(NnError::InvalidSpec(format!(
                        "fully_connected expects {in_features} input features, got {f}"
                    )));
                }
                Ok(vec![n, out_features])
            }
            LayerSpec::BatchNorm { channels, .. } => {
                let [_, c, _, _] = expect_rank4(input, "batch_norm")?;
                if c != channels {
                    return Err(NnError::InvalidSpec(format!(
                        "batch_norm expects {channels} channels, got {c}"
                    )));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
            LayerSpec::AvgPool2d { size, stride } => {
                let [n, c, h, w] = expect_rank4(input, "avg_pool2d")?;
                if h < size || w < size {
                    return Err(NnError::InvalidSpec(format!(
                        "avg_pool2d window {size} exceeds input {h}x{w}"
                    )));
                }
                let oh = (h - size) / stride + 1;
                let ow = (w - size) / stride + 1;
                Ok(vec![n, c, oh, ow])
            }
            LayerSpec::GlobalAvgPool => {
                let [n, c, _, _] = expect_rank4(input, "global_avg_pool")?;
                Ok(vec![n, c])
            }
        }
    }
}

fn expect_rank4(shape: &[usize], kind: &str) -> Result<[usize; 4]> {
    match shape {
        [n, c, h, w] => Ok([*n, *c, *h, *w]),
        _ => Err(NnError::InvalidSpec(format!(
            "{kind} expects a [batch, channels, height, width] input, got {shape:?}"
        ))),
    }
}

fn expect_rank2(shape: &[usize], kind: &str) -> Result<[usize; 2]> {
    match shape {
        [n, f] => Ok([*n, *f]),
        _ => Err(NnError::InvalidSpec(format!(
            "{kind} expects a [batch, features] input, got {shape:?}"
        ))),
    }
}

/// Walks a layer stack symbolically, returning the activation shape after
/// each layer. Fails with the index of the first incompatible layer.
pub fn simulate_shapes(specs: &[LayerSpec], input: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut shapes = Vec::with_capacity(specs.len());
    let mut current = input.to_vec();
    for (idx, spec) in specs.iter().enumerate() {
        current = spec.output_shape(&current).map_err(|e| NnError::ShapeMismatch {
            layer: idx,
            kind: spec.kind(),
            detail: e.to_string(),
        })?;
        shapes.push(current.clone());
    }
    Ok(shapes)
}

/// A named parameter tensor. `trainable` is false for batch-norm running
/// statistics, which are updated by the training loop rather than the
/// optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: &'static str,
    pub value: Tensor,
    pub trainable: bool,
}

/// One layer of a model: its spec plus its parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Vec<Param>,
}

impl Layer {
    pub fn new(spec: LayerSpec) -> Result<Self> {
        spec.validate()?;
        let params = spec
            .param_specs()
            .into_iter()
            .map(|(name, shape, trainable)| {
                let value = match (spec.kind(), name) {
                    // Batch-norm starts as the identity transform.
                    ("batch_norm", "scale") | ("batch_norm", "running_var") => {
                        Tensor::filled(&shape, 1.0)
                    }
                    _ => Tensor::zeros(&shape),
                };
                Param {
                    name,
                    value,
                    trainable,
                }
            })
            .collect();
        Ok(Self { spec, params })
    }

    pub fn param(&self, name: &str) -> &Tensor {
        &self
            .params
            .iter()
            .find(|p| p.name == name)
            .unwrap_or_else(|| panic!("layer {} has no parameter {name}", self.spec.kind()))
            .value
    }

    pub fn param_mut(&mut self, name: &str) -> &mut Tensor {
        let kind = self.spec.kind();
        &mut self
            .params
            .iter_mut()
            .find(|p| p.name == name)
            .unwrap_or_else(|| panic!("layer {kind} has no parameter {name}"))
            .value
    }
}

/// Per-layer values recorded during a cached forward pass that the backward
/// pass cannot cheaply recompute.
#[derive(Debug, Clone)]
pub enum LayerAux {
    None,
    /// Batch statistics used to normalize (train mode).
    BatchStats { mean: Vec<f64>, var: Vec<f64> },
    /// Kept units of a dropout mask (1.0 kept, 0.0 dropped), pre-scaling.
    DropoutMask { mask: Vec<f64> },
}

/// Whether batch-norm normalizes with batch statistics (training) or running
/// statistics (inference), and whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Train,
    Eval,
}

// ============================================================================
// Forward implementations
// ============================================================================

pub(crate) fn conv2d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    kernel: (usize, usize),
    stride: usize,
    padding: (usize, usize),
    out_shape: &[usize],
) -> Tensor {
    let [n, c, h, w] = [
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    ];
    let (oc, oh, ow) = (out_shape[1], out_shape[2], out_shape[3]);
    let k = c * kernel.0 * kernel.1;
    let w_mat = ArrayView2::from_shape((oc, k), weight.data()).expect("conv weight view");

    let mut out = Tensor::zeros(out_shape);
    let mut col = Array2::<f64>::zeros((k, oh * ow));
    for sample in 0..n {
        im2col(
            &input.data()[sample * c * h * w..(sample + 1) * c * h * w],
            c,
            h,
            w,
            kernel,
            stride,
            padding,
            oh,
            ow,
            &mut col,
        );
        let prod = w_mat.dot(&col);
        let dst = &mut out.data_mut()[sample * oc * oh * ow..(sample + 1) * oc * oh * ow];
        for ch in 0..oc {
            let b = bias.data()[ch];
            let row = prod.row(ch);
            let dst_row = &mut dst[ch * oh * ow..(ch + 1) * oh * ow];
            for (d, s) in dst_row.iter_mut().zip(row.iter()) {
                *d = s + b;
            }
        }
    }
    out
}

/// Unfolds one sample's padded receptive fields into a `[c*kh*kw, oh*ow]`
/// column matrix. Out-of-bounds taps contribute zeros.
#[allow(clippy::too_many_arguments)]
fn im2col(
    sample: &[f64],
    c: usize,
    h: usize,
    w: usize,
    kernel: (usize, usize),
    stride: usize,
    padding: (usize, usize),
    oh: usize,
    ow: usize,
    col: &mut Array2<f64>,
) {
    col.fill(0.0);
    for ch in 0..c {
        let plane = &sample[ch * h * w..(ch + 1) * h * w];
        for kr in 0..kernel.0 {
            for kc in 0..kernel.1 {
                let row_idx = (ch * kernel.0 + kr) * kernel.1 + kc;
                let mut row = col.row_mut(row_idx);
                for or in 0..oh {
                    let ir = (or * stride + kr) as isize - padding.0 as isize;
                    if ir < 0 || ir >= h as isize {
                        continue;
                    }
                    let ir = ir as usize;
                    for oc_ in 0..ow {
                        let ic = (oc_ * stride + kc) as isize - padding.1 as isize;
                        if ic < 0 || ic >= w as isize {
                            continue;
                        }
                        row[or * ow + oc_] = plane[ir * w + ic as usize];
                    }
                }
            }
        }
    }
}

/// Scatters a `[c*kh*kw, oh*ow]` column-gradient matrix back onto one
/// sample's input gradient, accumulating overlapping taps.
#[allow(clippy::too_many_arguments)]
fn col2im(
    col: &Array2<f64>,
    c: usize,
    h: usize,
    w: usize,
    kernel: (usize, usize),
    stride: usize,
    padding: (usize, usize),
    oh: usize,
    ow: usize,
    grad_sample: &mut [f64],
) {
    for ch in 0..c {
        let plane = &mut grad_sample[ch * h * w..(ch + 1) * h * w];
        for kr in 0..kernel.0 {
            for kc in 0..kernel.1 {
                let row_idx = (ch * kernel.0 + kr) * kernel.1 + kc;
                let row = col.row(row_idx);
                for or in 0..oh {
                    let ir = (or * stride + kr) as isize - padding.0 as isize;
                    if ir < 0 || ir >= h as isize {
                        continue;
                    }
                    let ir = ir as usize;
                    for oc_ in 0..ow {
                        let ic = (oc_ * stride + kc) as isize - padding.1 as isize;
                        if ic < 0 || ic >= w as isize {
                            continue;
                        }
                        plane[ir * w + ic as usize] += row[or * ow + oc_];
                    }
                }
            }
        }
    }
}

pub(crate) struct Conv2dGrads {
    pub grad_input: Tensor,
    pub grad_weight: Tensor,
    pub grad_bias: Tensor,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    kernel: (usize, usize),
    stride: usize,
    padding: (usize, usize),
) -> Conv2dGrads {
    let [n, c, h, w] = [
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    ];
    let (oc, oh, ow) = (grad_out.shape()[1], grad_out.shape()[2], grad_out.shape()[3]);
    let k = c * kernel.0 * kernel.1;
    let w_mat = ArrayView2::from_shape((oc, k), weight.data()).expect("conv weight view");

    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_weight = Array2::<f64>::zeros((oc, k));
    let mut grad_bias = Tensor::zeros(&[oc]);
    let mut col = Array2::<f64>::zeros((k, oh * ow));

    for sample in 0..n {
        let go = ArrayView2::from_shape(
            (oc, oh * ow),
            &grad_out.data()[sample * oc * oh * ow..(sample + 1) * oc * oh * ow],
        )
        .expect("grad_out view");

        // Bias gradient: sum over spatial positions.
        for ch in 0..oc {
            grad_bias.data_mut()[ch] += go.row(ch).sum();
        }

        // Weight gradient: dW += dY · colᵀ.
        im2col(
            &input.data()[sample * c * h * w..(sample + 1) * c * h * w],
            c,
            h,
            w,
            kernel,
            stride,
            padding,
            oh,
            ow,
            &mut col,
        );
        grad_weight += &go.dot(&col.t());

        // Input gradient: dcol = Wᵀ · dY, scattered back.
        let grad_col = w_mat.t().dot(&go);
        col2im(
            &grad_col,
            c,
            h,
            w,
            kernel,
            stride,
            padding,
            oh,
            ow,
            &mut grad_input.data_mut()[sample * c * h * w..(sample + 1) * c * h * w],
        );
    }

    let grad_weight = Tensor::from_vec(weight.shape(), grad_weight.into_raw_vec_and_offset().0)
        .expect("conv grad weight shape");
    Conv2dGrads {
        grad_input,
        grad_weight,
        grad_bias,
    }
}

pub(crate) fn fully_connected_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let (n, in_f) = (input.shape()[0], input.shape()[1]);
    let out_f = weight.shape()[0];
    let x = ArrayView2::from_shape((n, in_f), input.data()).expect("fc input view");
    let w = ArrayView2::from_shape((out_f, in_f), weight.data()).expect("fc weight view");
    let mut y = x.dot(&w.t());
    for mut row in y.rows_mut() {
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Tensor::from_vec(&[n, out_f], y.into_raw_vec_and_offset().0).expect("fc output shape")
}

pub(crate) struct FcGrads {
    pub grad_input: Tensor,
    pub grad_weight: Tensor,
    pub grad_bias: Tensor,
}

pub(crate) fn fully_connected_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
) -> FcGrads {
    let (n, in_f) = (input.shape()[0], input.shape()[1]);
    let out_f = weight.shape()[0];
    let x = ArrayView2::from_shape((n, in_f), input.data()).expect("fc input view");
    let w = ArrayView2::from_shape((out_f, in_f), weight.data()).expect("fc weight view");
    let go = ArrayView2::from_shape((n, out_f), grad_out.data()).expect("fc grad view");

    let grad_weight = go.t().dot(&x);
    let grad_input = go.dot(&w);
    let mut grad_bias = Tensor::zeros(&[out_f]);
    for row in go.rows() {
        for (g, v) in grad_bias.data_mut().iter_mut().zip(row.iter()) {
            *g += v;
        }
    }
    FcGrads {
        grad_input: Tensor::from_vec(&[n, in_f], grad_input.into_raw_vec_and_offset().0)
            .expect("fc grad input shape"),
        grad_weight: Tensor::from_vec(&[out_f, in_f], grad_weight.into_raw_vec_and_offset().0)
            .expect("fc grad weight shape"),
        grad_bias,
    }
}

/// Per-channel mean and biased variance over the batch and spatial dims.
pub(crate) fn batch_stats(input: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let [n, c, h, w] = [
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    ];
    let m = (n * h * w) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for sample in 0..n {
        for ch in 0..c {
            let plane = &input.data()[(sample * c + ch) * h * w..(sample * c + ch + 1) * h * w];
            mean[ch] += plane.iter().sum::<f64>();
        }
    }
    for v in mean.iter_mut() {
        *v /= m;
    }
    for sample in 0..n {
        for ch in 0..c {
            let plane = &input.data()[(sample * c + ch) * h * w..(sample * c + ch + 1) * h * w];
            var[ch] += plane.iter().map(|x| (x - mean[ch]).powi(2)).sum::<f64>();
        }
    }
    for v in var.iter_mut() {
        *v /= m;
    }
    (mean, var)
}

pub(crate) fn batch_norm_forward(
    input: &Tensor,
    scale: &Tensor,
    shift: &Tensor,
    mean: &[f64],
    var: &[f64],
    epsilon: f64,
) -> Tensor {
    let [n, c, h, w] = [
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    ];
    let mut out = Tensor::zeros(input.shape());
    for sample in 0..n {
        for ch in 0..c {
            let inv_std = 1.0 / (var[ch] + epsilon).sqrt();
            let (g, b) = (scale.data()[ch], shift.data()[ch]);
            let base = (sample * c + ch) * h * w;
            let src = &input.data()[base..base + h * w];
            let dst = &mut out.data_mut()[base..base + h * w];
            for (d, x) in dst.iter_mut().zip(src) {
                *d = g * (x - mean[ch]) * inv_std + b;
            }
        }
    }
    out
}

pub(crate) struct BatchNormGrads {
    pub grad_input: Tensor,
    pub grad_scale: Tensor,
    pub grad_shift: Tensor,
}

/// Backward through batch-stat normalization: gradients flow through the
/// batch mean and variance as well as the normalized values.
pub(crate) fn batch_norm_backward_train(
    input: &Tensor,
    scale: &Tensor,
    grad_out: &Tensor,
    mean: &[f64],
    var: &[f64],
    epsilon: f64,
) -> BatchNormGrads {
    let [n, c, h, w] = [
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    ];
    let m = (n * h * w) as f64;
    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_scale = Tensor::zeros(&[c]);
    let mut grad_shift = Tensor::zeros(&[c]);

    for ch in 0..c {
        let inv_std = 1.0 / (var[ch] + epsilon).sqrt();
        let g = scale.data()[ch];

        // First pass: accumulate Σdy, Σdy·x̂ for this channel.
        let mut sum_dy = 0.0;
        let mut sum_dy_xhat = 0.0;
        for sample in 0..n {
            let base = (sample * c + ch) * h * w;
            for i in 0..h * w {
                let dy = grad_out.data()[base + i];
                let xhat = (input.data()[base + i] - mean[ch]) * inv_std;
                sum_dy += dy;
                sum_dy_xhat += dy * xhat;
            }
        }
        grad_shift.data_mut()[ch] = sum_dy;
        grad_scale.data_mut()[ch] = sum_dy_xhat;

        // Second pass: dx = (γ/√(σ²+ε)) · (dy − Σdy/m − x̂·Σ(dy·x̂)/m).
        let k = g * inv_std;
        for sample in 0..n {
            let base = (sample * c + ch) * h * w;
            for i in 0..h * w {
                let dy = grad_out.data()[base + i];
                let xhat = (input.data()[base + i] - mean[ch]) * inv_std;
                grad_input.data_mut()[base + i] =
                    k * (dy - sum_dy / m - xhat * sum_dy_xhat / m);
            }
        }
    }
    BatchNormGrads {
        grad_input,
        grad_scale,
        grad_shift,
    }
}

/// Backward when normalizing with fixed running statistics: the stats are
/// constants, so the input gradient is a per-channel rescale.
pub(crate) fn batch_norm_backward_eval(
    input: &Tensor,
    scale: &Tensor,
    grad_out: &Tensor,
    mean: &[f64],
    var: &[f64],
    epsilon: f64,
) -> BatchNormGrads {
    let [n, c, h, w] = [
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    ];
    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_scale = Tensor::zeros(&[c]);
    let mut grad_shift = Tensor::zeros(&[c]);
    for ch in 0..c {
        let inv_std = 1.0 / (var[ch] + epsilon).sqrt();
        let k = scale.data()[ch] * inv_std;
        for sample in 0..n {
            let base = (sample * c + ch) * h * w;
            for i in 0..h * w {
                let dy = grad_out.data()[base + i];
                let xhat = (input.data()[base + i] - mean[ch]) * inv_std;
                grad_input.data_mut()[base + i] = k * dy;
                grad_scale.data_mut()[ch] += dy * xhat;
                grad_shift.data_mut()[ch] += dy;
            }
        }
    }
    BatchNormGrads {
        grad_input,
        grad_scale,
        grad_shift,
    }
}

pub(crate) fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

pub(crate) fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut grad = grad_out.clone();
    for (g, x) in grad.data_mut().iter_mut().zip(input.data()) {
        if *x <= 0.0 {
            *g = 0.0;
        }
    }
    grad
}

pub(crate) fn avg_pool_forward(input: &Tensor, size: usize, stride: usize, out_shape: &[usize]) -> Tensor {
    let [n, c, h, w] = [
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    ];
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let norm = 1.0 / (size * size) as f64;
    let mut out = Tensor::zeros(out_shape);
    for plane_idx in 0..n * c {
        let src = &input.data()[plane_idx * h * w..(plane_idx + 1) * h * w];
        let dst = &mut out.data_mut()[plane_idx * oh * ow..(plane_idx + 1) * oh * ow];
        for or in 0..oh {
            for oc_ in 0..ow {
                let mut acc = 0.0;
                for kr in 0..size {
                    for kc in 0..size {
                        acc += src[(or * stride + kr) * w + oc_ * stride + kc];
                    }
                }
                dst[or * ow + oc_] = acc * norm;
            }
        }
    }
    out
}

pub(crate) fn avg_pool_backward(
    input_shape: &[usize],
    grad_out: &Tensor,
    size: usize,
    stride: usize,
) -> Tensor {
    let [n, c, h, w] = [
        input_shape[0],
        input_shape[1],
        input_shape[2],
        input_shape[3],
    ];
    let (oh, ow) = (grad_out.shape()[2], grad_out.shape()[3]);
    let norm = 1.0 / (size * size) as f64;
    let mut grad = Tensor::zeros(input_shape);
    for plane_idx in 0..n * c {
        let src = &grad_out.data()[plane_idx * oh * ow..(plane_idx + 1) * oh * ow];
        let dst = &mut grad.data_mut()[plane_idx * h * w..(plane_idx + 1) * h * w];
        for or in 0..oh {
            for oc_ in 0..ow {
                let g = src[or * ow + oc_] * norm;
                for kr in 0..size {
                    for kc in 0..size {
                        dst[(or * stride + kr) * w + oc_ * stride + kc] += g;
                    }
                }
            }
        }
    }
    grad
}

pub(crate) fn global_avg_pool_forward(input: &Tensor) -> Tensor {
    let [n, c, h, w] = [
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    ];
    let norm = 1.0 / (h * w) as f64;
    let mut out = Tensor::zeros(&[n, c]);
    for plane_idx in 0..n * c {
        let plane = &input.data()[plane_idx * h * w..(plane_idx + 1) * h * w];
        out.data_mut()[plane_idx] = plane.iter().sum::<f64>() * norm;
    }
    out
}

pub(crate) fn global_avg_pool_backward(input_shape: &[usize], grad_out: &Tensor) -> Tensor {
    let [n, c, h, w] = [
        input_shape[0],
        input_shape[1],
        input_shape[2],
        input_shape[3],
    ];
    let norm = 1.0 / (h * w) as f64;
    let mut grad = Tensor::zeros(input_shape);
    for plane_idx in 0..n * c {
        let g = grad_out.data()[plane_idx] * norm;
        for v in &mut grad.data_mut()[plane_idx * h * w..(plane_idx + 1) * h * w] {
            *v = g;
        }
    }
    grad
}

pub(crate) fn dropout_forward(input: &Tensor, mask: &[f64], p: f64) -> Tensor {
    let keep = 1.0 - p;
    let mut out = input.clone();
    for (v, m) in out.data_mut().iter_mut().zip(mask) {
        *v *= m / keep;
    }
    out
}

pub(crate) fn dropout_backward(grad_out: &Tensor, mask: &[f64], p: f64) -> Tensor {
    let keep = 1.0 - p;
    let mut grad = grad_out.clone();
    for (g, m) in grad.data_mut().iter_mut().zip(mask) {
        *g *= m / keep;
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_kinds_serialize_snake_case() {
        let spec = LayerSpec::AvgPool2d { size: 2, stride: 2 };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"avg_pool2d\""));
        let back: LayerSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn conv_shape_same_padding() {
        let spec = LayerSpec::Conv2d {
            in_channels: 3,
            out_channels: 8,
            kernel: (3, 3),
            stride: 1,
            padding: (1, 1),
        };
        assert_eq!(spec.output_shape(&[2, 3, 10, 7]).unwrap(), vec![2, 8, 10, 7]);
        assert!(spec.output_shape(&[2, 4, 10, 7]).is_err());
    }

    #[test]
    fn pool_shape_floors_odd_inputs() {
        let spec = LayerSpec::AvgPool2d { size: 2, stride: 2 };
        assert_eq!(spec.output_shape(&[1, 4, 7, 9]).unwrap(), vec![1, 4, 3, 4]);
    }

    #[test]
    fn simulate_shapes_reports_offending_layer() {
        let specs = vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 4,
                kernel: (3, 3),
                stride: 1,
                padding: (1, 1),
            },
            LayerSpec::GlobalAvgPool,
            LayerSpec::FullyConnected {
                in_features: 5,
                out_features: 2,
            },
        ];
        let err = simulate_shapes(&specs, &[1, 1, 8, 8]).unwrap_err();
        match err {
            NnError::ShapeMismatch { layer, kind, .. } => {
                assert_eq!(layer, 2);
                assert_eq!(kind, "fully_connected");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        // A single centered-impulse kernel with same padding must copy the
        // input plane through unchanged.
        let weight = Tensor::from_vec(
            &[1, 1, 3, 3],
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let bias = Tensor::zeros(&[1]);
        let input = Tensor::from_vec(&[1, 1, 4, 5], (0..20).map(|i| i as f64 * 0.3 - 2.0).collect())
            .unwrap();
        let out = conv2d_forward(&input, &weight, &bias, (3, 3), 1, (1, 1), &[1, 1, 4, 5]);
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn avg_pool_floor_discards_trailing_row_col() {
        // 3x3 input, 2x2 window stride 2: only the top-left window survives.
        let input = Tensor::from_vec(&[1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let out = avg_pool_forward(&input, 2, 2, &[1, 1, 1, 1]);
        assert_eq!(out.data(), &[(1.0 + 2.0 + 4.0 + 5.0) / 4.0]);

        // Discarded cells receive no gradient.
        let grad = avg_pool_backward(&[1, 1, 3, 3], &out, 2, 2);
        assert_eq!(grad.data()[2], 0.0);
        assert_eq!(grad.data()[8], 0.0);
        assert!(grad.data()[0] > 0.0);
    }

    #[test]
    fn batch_stats_match_direct_computation() {
        let input = Tensor::from_vec(&[2, 1, 1, 2], vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let (mean, var) = batch_stats(&input);
        assert!((mean[0] - 4.0).abs() < 1e-12);
        assert!((var[0] - 5.0).abs() < 1e-12); // biased: mean of squared deviations
    }
}
