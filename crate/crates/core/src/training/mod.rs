//! Adversarial training, encoder fitting, autoencoder baseline and checkpoint handling.

mod cae;
mod checkpoint;
mod config;
mod encoder;
mod ganomaly;
mod wgan;

use rand::seq::SliceRandom;
use rand::Rng;
use rfanogan_autograd::{Adam, Tensor, Var};
use thiserror::Error;

use crate::anomaly::AnomalyError;
use crate::ganmodels::{Model, ModelError};
use crate::metrics::MetricsError;
use crate::rfdata::IqFrame;

pub use cae::{cae_threshold, train_cae, CaeModel};
pub use checkpoint::{load_checkpoint, save_checkpoint, select_checkpoint, Checkpoint};
pub use config::{FidelityFeatures, TrainingConfig};
pub use encoder::{fit_encoder, train_encoder, EncoderOutcome};
pub use ganomaly::{train_ganomaly, GanomalyModel};
pub use wgan::{train_wgan_gp, train_wgan_gp_with, EpochStats, WganOutcome};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("non-finite {what} at epoch {epoch}, step {step}")]
    NonFiniteLoss { what: &'static str, epoch: usize, step: usize },
    #[error("{0} parameters changed while it was frozen")]
    Unfrozen(&'static str),
    #[error("empty checkpoint history")]
    EmptyHistory,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<rfanogan_autograd::AutogradError> for TrainingError {
    fn from(e: rfanogan_autograd::AutogradError) -> Self {
        TrainingError::Model(e.into())
    }
}

pub type Result<T> = std::result::Result<T, TrainingError>;

/// Stream tags so each consumer of randomness gets its own generator.
pub(crate) mod stream {
    pub const INIT_G: u64 = 0x01;
    pub const INIT_D: u64 = 0x02;
    pub const INIT_E: u64 = 0x03;
    pub const INIT_CAE: u64 = 0x04;
    pub const BATCHES: u64 = 0x10;
    pub const LATENT: u64 = 0x11;
    pub const EVAL: u64 = 0x12;
    pub const ENCODER_BATCHES: u64 = 0x13;
    pub const CAE_BATCHES: u64 = 0x14;

    pub fn seed(base: u64, tag: u64) -> u64 {
        base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

pub(crate) fn frames_tensor(frames: &[IqFrame]) -> Result<Tensor> {
    if frames.is_empty() {
        return Err(TrainingError::EmptyTrainingSet);
    }
    let refs: Vec<&IqFrame> = frames.iter().collect();
    Ok(crate::ganmodels::frames_to_batch(&refs)?)
}

/// Rows of `data` at `idx`, as a new batch.
pub(crate) fn gather(data: &Tensor, idx: &[usize]) -> Tensor {
    let per: usize = data.shape()[1..].iter().product();
    let mut out = Vec::with_capacity(idx.len() * per);
    for &i in idx {
        out.extend_from_slice(&data.data()[i * per..(i + 1) * per]);
    }
    let mut shape = data.shape().to_vec();
    shape[0] = idx.len();
    Tensor::new(&shape, out).expect("consistent shape")
}

/// Shuffled mini-batches of `0..n`; the last batch may be short.
pub(crate) fn epoch_batches<R: Rng + ?Sized>(n: usize, batch: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch).map(<[usize]>::to_vec).collect()
}

pub(crate) fn latent_batch<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Tensor {
    Tensor::uniform(&[n, dim], -1.0, 1.0, rng)
}

pub(crate) fn adam_for(cfg: &TrainingConfig) -> Adam {
    Adam::new(cfg.lr as f32, cfg.adam_beta1 as f32, cfg.adam_beta2 as f32)
}

/// One optimiser update of `net` from gradients aligned with its parameters.
pub(crate) fn apply_adam<M: Model>(net: &mut M, adam: &mut Adam, grads: &[Var]) -> Result<()> {
    let mut params = net.param_tensors();
    let grads: Vec<Tensor> = grads.iter().map(|g| g.value().clone()).collect();
    adam.step(&mut params, &grads)?;
    net.set_param_tensors(params)?;
    Ok(())
}

pub(crate) fn finite(value: f32, what: &'static str, epoch: usize, step: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value as f64)
    } else {
        Err(TrainingError::NonFiniteLoss { what, epoch, step })
    }
}
