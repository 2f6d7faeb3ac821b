//! Network architectures, parameterised networks and GAN objectives.

mod costs;
mod network;
mod params;
mod penalty;
mod spec;

use thiserror::Error;

pub use costs::{cgan_costs, gan_costs, lsgan_costs, wgan_costs, wgan_costs_var, CostPair, GeneratorVariant};
pub use network::{frames_to_batch, Forward, Mode, Model, Network};
pub use params::{decode_params, encode_params, StateDict};
pub use penalty::{gradient_penalty, gradient_penalty_value, gradient_penalty_with_alphas, sample_alphas};
pub use spec::{
    build_network, build_network_with, infer_shapes, ArchOptions, LayerKind, LayerSpec, NetworkSpec, Role, LATENT_DIM,
    LEAKY_SLOPE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch at layer {layer}: {reason}")]
    ShapeMismatch { layer: usize, reason: String },
    #[error("{role:?} needs a frame width that is a positive multiple of {multiple}, got {width}")]
    UnsupportedWidth { role: Role, width: usize, multiple: usize },
    #[error("unsupported role: {0}")]
    UnsupportedRole(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("batches differ in shape: {0:?} vs {1:?}")]
    BatchMismatch(Vec<usize>, Vec<usize>),
    #[error("critic gradient is not finite at an interpolate")]
    NonDifferentiable,
    #[error("bad parameter state: {0}")]
    State(String),
    #[error(transparent)]
    Autograd(#[from] rfanogan_autograd::AutogradError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
