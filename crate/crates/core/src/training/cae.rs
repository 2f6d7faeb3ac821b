//! Convolutional autoencoder baseline with a reconstruction-error threshold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfanogan_autograd::{grad, Var};

use super::config::TrainingConfig;
use super::{adam_for, apply_adam, epoch_batches, finite, frames_tensor, gather, stream, Result, TrainingError};
use crate::anomaly::reconstruction_errors;
use crate::ganmodels::{build_network_with, ArchOptions, Mode, Model, Network, Role};
use crate::rfdata::IqFrame;

#[derive(Clone, Debug)]
pub struct CaeModel {
    pub net: Network,
    /// Frames whose reconstruction error exceeds this are outliers.
    pub threshold: f64,
    /// Loss of every update, in order.
    pub step_losses: Vec<f64>,
}

/// Mean plus one population standard deviation.
pub fn cae_threshold(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(TrainingError::EmptyTrainingSet);
    }
    if losses.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(TrainingError::NonFiniteLoss { what: "reconstruction loss", epoch: 0, step: 0 });
    }
    let n = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    Ok(mean + var.sqrt())
}

/// Trains the autoencoder on mean squared reconstruction error for
/// `cfg.cae_epochs()` epochs, then sets the threshold from the per-frame
/// training losses in inference mode.
pub fn train_cae(frames: &[IqFrame], cfg: &TrainingConfig) -> Result<CaeModel> {
    cfg.validate()?;
    let data = frames_tensor(frames)?;
    let n = data.shape()[0];
    let arch = ArchOptions { frame_width: frames[0].width(), channel_divisor: cfg.channel_divisor };
    let mut net = Network::new(
        build_network_with(Role::Cae, arch)?,
        &mut ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::INIT_CAE)),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::CAE_BATCHES));
    let mut opt = adam_for(cfg);
    let mut step_losses = Vec::new();
    for epoch in 1..=cfg.cae_epochs() {
        for (step, idx) in epoch_batches(n, cfg.batch_size, &mut rng).into_iter().enumerate() {
            let x = Var::constant(gather(&data, &idx));
            let recon = net.forward(&x, Mode::Train)?.output;
            let loss = x.sub(&recon)?.square().mean();
            step_losses.push(finite(loss.item(), "reconstruction loss", epoch, step)?);
            let grads = grad(&loss, &net.param_refs(), false)?;
            apply_adam(&mut net, &mut opt, &grads)?;
        }
    }
    let threshold = cae_threshold(&reconstruction_errors(&net, &data)?)?;
    Ok(CaeModel { net, threshold, step_losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_rule() {
        assert_eq!(cae_threshold(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cae_threshold(&[0.0, 2.0]).unwrap(), 2.0);
        assert!(cae_threshold(&[]).is_err());
        assert!(cae_threshold(&[f64::NAN]).is_err());
    }
}
