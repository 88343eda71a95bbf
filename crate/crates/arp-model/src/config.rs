//! Architecture configuration and model assembly for the annoyance-rating
//! predictor.

use nn_core::{LayerSpec, Model};
use serde::{Deserialize, Serialize};

use crate::{ArpError, Result};

/// Filter counts for the six convolutional blocks of the full-scale model.
pub const DEFAULT_FILTER_COUNTS: [usize; 6] = [16, 32, 64, 128, 256, 512];

/// Smallest spectrogram side that survives six 2x2 pooling stages.
pub const MIN_INPUT_DIM: usize = 64;

/// Hyper-parameters for building and training the annoyance-rating network.
///
/// The network is six convolutional blocks (conv 3x3, batch norm, relu,
/// conv 3x3, batch norm, relu, 2x2 average pool) followed by a global
/// average pool, a fully-connected embedding with relu and dropout, and a
/// single-output prediction layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArpConfig {
    /// Output channels of each block, strictly increasing, exactly six.
    pub block_filter_counts: Vec<usize>,
    /// Convolution kernel height and width.
    pub kernel: (usize, usize),
    /// Width of the fully-connected embedding layer.
    pub embedding_dim: usize,
    /// Dropout probability applied after the embedding relu.
    pub dropout_p: f64,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Mini-batch size for training.
    pub batch_size: usize,
    /// Number of passes over the training split.
    pub epochs: usize,
}

impl Default for ArpConfig {
    fn default() -> Self {
        ArpConfig {
            block_filter_counts: DEFAULT_FILTER_COUNTS.to_vec(),
            kernel: (3, 3),
            embedding_dim: 2048,
            dropout_p: 0.2,
            learning_rate: 0.005,
            batch_size: 64,
            epochs: 100,
        }
    }
}

impl ArpConfig {
    /// A reduced configuration that trains quickly on a desk CPU while
    /// keeping the full six-block structure.
    pub fn desk_scale() -> Self {
        ArpConfig {
            block_filter_counts: DEFAULT_FILTER_COUNTS.iter().map(|f| f / 2).collect(),
            ..ArpConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_filter_counts.len() != 6 {
            return Err(ArpError::Config(format!(
                "expected exactly 6 block filter counts, got {}",
                self.block_filter_counts.len()
            )));
        }
        if self.block_filter_counts.iter().any(|&f| f == 0) {
            return Err(ArpError::Config("filter counts must be positive".into()));
        }
        for pair in self.block_filter_counts.windows(2) {
            if pair[1] <= pair[0] {
                return Err(ArpError::Config(format!(
                    "filter counts must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if self.kernel.0 == 0 || self.kernel.1 == 0 {
            return Err(ArpError::Config("kernel dimensions must be positive".into()));
        }
        if self.kernel.0 % 2 == 0 || self.kernel.1 % 2 == 0 {
            return Err(ArpError::Config(
                "kernel dimensions must be odd so same-padding is exact".into(),
            ));
        }
        if self.embedding_dim == 0 {
            return Err(ArpError::Config("embedding_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(ArpError::Config(format!(
                "dropout_p must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(ArpError::Config(format!(
                "learning_rate must be a positive finite number, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(ArpError::Config("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(ArpError::Config("epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Expands a configuration into the concrete layer stack.
pub fn arp_layer_specs(config: &ArpConfig) -> Vec<LayerSpec> {
    let (kh, kw) = config.kernel;
    let padding = (kh / 2, kw / 2);
    let mut specs = Vec::new();
    let mut in_channels = 1;
    for &filters in &config.block_filter_counts {
        for conv in 0..2 {
            specs.push(LayerSpec::Conv2d {
                in_channels: if conv == 0 { in_channels } else { filters },
                out_channels: filters,
                kernel: (kh, kw),
                stride: 1,
                padding,
            });
            specs.push(LayerSpec::BatchNorm {
                channels: filters,
                epsilon: 1e-5,
                momentum: 0.1,
            });
            specs.push(LayerSpec::Relu);
        }
        specs.push(LayerSpec::AvgPool2d { size: 2, stride: 2 });
        in_channels = filters;
    }
    specs.push(LayerSpec::GlobalAvgPool);
    specs.push(LayerSpec::FullyConnected {
        in_features: in_channels,
        out_features: config.embedding_dim,
    });
    specs.push(LayerSpec::Relu);
    specs.push(LayerSpec::Dropout { p: config.dropout_p });
    specs.push(LayerSpec::FullyConnected {
        in_features: config.embedding_dim,
        out_features: 1,
    });
    specs
}

/// Builds the network and initialises its parameters from the given seed.
pub fn build_arp(config: &ArpConfig, seed: u64) -> Result<Model> {
    config.validate()?;
    let mut model = Model::new(arp_layer_specs(config))?;
    model.init_params(seed);
    Ok(model)
}
