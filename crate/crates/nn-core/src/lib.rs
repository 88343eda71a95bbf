//! Minimal reverse-mode neural-network kernel: dense `f64` tensors, a fixed
//! menu of layers (conv, batch-norm, relu, pooling, dropout, fully
//! connected), MSE loss, Adam, gradient checking and a versioned weight
//! file format.

mod adam;
mod gradcheck;
mod io;
mod layer;
mod model;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{check_gradients, GradCheckReport, MAGNITUDE_FLOOR};
pub use io::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_VERSION};
pub use layer::{simulate_shapes, Layer, LayerAux, LayerSpec, Param, Phase};
pub use model::{mse, ForwardCache, Gradients, Model, ModelExtras};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("layer {layer} ({kind}): {detail}")]
    ShapeMismatch {
        layer: usize,
        kind: &'static str,
        detail: String,
    },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("training diverged: {0}")]
    Diverged(&'static str),
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),
    #[error("weight file format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
