//! Encoder fitting against a frozen generator and critic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfanogan_autograd::{grad, Tensor, Var};

use super::config::TrainingConfig;
use super::{adam_for, apply_adam, epoch_batches, finite, frames_tensor, gather, stream, Result, TrainingError};
use crate::ganmodels::{build_network_with, ArchOptions, Forward, Mode, Model, Network, Role};
use crate::rfdata::IqFrame;

#[derive(Clone, Debug)]
pub struct EncoderOutcome {
    pub encoder: Network,
    /// Loss of every update, in order.
    pub step_losses: Vec<f64>,
}

fn feats(f: Forward) -> Var {
    f.features.unwrap_or(f.output)
}

/// Trains `e` for `epochs` passes over `data` so that `g(e(x))` reproduces `x`.
///
/// The loss per batch is `mean (x - g(e(x)))^2 + kappa * mean (f(x) - f(g(e(x))))^2`
/// where `f` is the critic's feature output (its plain output if it has no
/// feature layer). `g` and `d` run in inference mode and are checked to be
/// unchanged afterwards. Returns the loss of every update.
pub fn fit_encoder<G: Model, D: Model, E: Model>(
    g: &G,
    d: &D,
    e: &mut E,
    data: &Tensor,
    cfg: &TrainingConfig,
    epochs: usize,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = *data.shape().first().ok_or(TrainingError::EmptyTrainingSet)?;
    if n == 0 {
        return Err(TrainingError::EmptyTrainingSet);
    }
    let (g_hash, d_hash) = (g.param_hash(), d.param_hash());
    let mut rng = ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::ENCODER_BATCHES));
    let mut opt = adam_for(cfg);
    let kappa = cfg.kappa as f32;
    let mut losses = Vec::new();
    for epoch in 1..=epochs {
        for (step, idx) in epoch_batches(n, cfg.batch_size, &mut rng).into_iter().enumerate() {
            let x = Var::constant(gather(data, &idx));
            let f_x = feats(d.forward_eval(&x)?).detach();
            let z = e.forward(&x, Mode::Train)?.output;
            let recon = g.forward_eval(&z)?.output;
            let f_r = feats(d.forward_eval(&recon)?);
            let loss = x.sub(&recon)?.square().mean().add(&f_x.sub(&f_r)?.square().mean().scale(kappa))?;
            losses.push(finite(loss.item(), "encoder loss", epoch, step)?);
            let grads = grad(&loss, &e.param_refs(), false)?;
            apply_adam(e, &mut opt, &grads)?;
        }
    }
    if g.param_hash() != g_hash {
        return Err(TrainingError::Unfrozen("generator"));
    }
    if d.param_hash() != d_hash {
        return Err(TrainingError::Unfrozen("critic"));
    }
    Ok(losses)
}

/// Builds an encoder matching `g`'s frame width and channel divisor and fits it
/// on `frames` for `cfg.encoder_epochs()` epochs.
pub fn train_encoder(g: &Network, d: &Network, frames: &[IqFrame], cfg: &TrainingConfig) -> Result<EncoderOutcome> {
    let data = frames_tensor(frames)?;
    let arch = ArchOptions { frame_width: g.spec().frame_width, channel_divisor: g.spec().channel_divisor };
    let mut encoder = Network::new(
        build_network_with(Role::Encoder, arch)?,
        &mut ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::INIT_E)),
    )?;
    let step_losses = fit_encoder(g, d, &mut encoder, &data, cfg, cfg.encoder_epochs())?;
    Ok(EncoderOutcome { encoder, step_losses })
}
