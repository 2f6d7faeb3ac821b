//! Encoder-decoder-encoder training with an adversarial feature loss.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfanogan_autograd::{grad, no_grad, Var};

use super::config::TrainingConfig;
use super::{adam_for, apply_adam, epoch_batches, finite, frames_tensor, gather, stream, Result};
use crate::anomaly::GanomalyWeights;
use crate::ganmodels::{build_network_with, gradient_penalty, wgan_costs_var, ArchOptions, Mode, Model, Network, Role};
use crate::rfdata::IqFrame;

const NORM_EPS: f32 = 1e-12;

#[derive(Clone, Debug)]
pub struct GanomalyModel {
    /// Encoder half of the generator, `x -> z`.
    pub g_e: Network,
    /// Decoder half of the generator, `z -> x_hat`.
    pub g_d: Network,
    /// Second encoder, `x_hat -> z_hat`.
    pub e: Network,
    /// Critic whose features drive the adversarial loss.
    pub d: Network,
    /// Weighted generator loss of every update.
    pub step_losses: Vec<f64>,
}

/// Mean over the batch of each sample's L2 norm.
fn mean_l2(v: &Var) -> Result<Var> {
    let mut s = vec![1usize; v.shape().len()];
    s[0] = v.shape()[0];
    Ok(v.square().sum_to(&s)?.add_scalar(NORM_EPS).sqrt().mean())
}

fn mean_l1(v: &Var) -> Var {
    v.abs().sum().scale(1.0 / v.shape()[0] as f32)
}

/// Trains the three generator networks on the weighted adversarial,
/// contextual and encoder losses, alternating one critic update (Wasserstein
/// cost with gradient penalty, real frames against reconstructions) with one
/// generator update per batch, for `cfg.epochs` epochs.
pub fn train_ganomaly(frames: &[IqFrame], cfg: &TrainingConfig, w: &GanomalyWeights) -> Result<GanomalyModel> {
    cfg.validate()?;
    let w = GanomalyWeights::new(w.w_adv, w.w_con, w.w_enc)?;
    let data = frames_tensor(frames)?;
    let n = data.shape()[0];
    let arch = ArchOptions { frame_width: frames[0].width(), channel_divisor: cfg.channel_divisor };
    let mut init = ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::INIT_E));
    let mut g_e = Network::new(build_network_with(Role::Encoder, arch)?, &mut init)?;
    let mut g_d = Network::new(build_network_with(Role::Generator, arch)?, &mut init)?;
    let mut e = Network::new(build_network_with(Role::Encoder, arch)?, &mut init)?;
    let mut d = Network::new(build_network_with(Role::Critic, arch)?, &mut init)?;
    let (mut o_ge, mut o_gd, mut o_e, mut o_d) = (adam_for(cfg), adam_for(cfg), adam_for(cfg), adam_for(cfg));
    let mut rng = ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::BATCHES));
    let lambda = cfg.gp_lambda as f32;
    let mut step_losses = Vec::new();

    for epoch in 1..=cfg.epochs {
        for (step, idx) in epoch_batches(n, cfg.batch_size, &mut rng).into_iter().enumerate() {
            let real = gather(&data, &idx);
            let x = Var::constant(real.clone());

            let x_hat = no_grad(|| -> Result<Var> {
                let z = g_e.forward(&x, Mode::Train)?.output;
                Ok(g_d.forward(&z, Mode::Train)?.output)
            })?;
            let d_real = d.forward(&x, Mode::Train)?.output;
            let d_fake = d.forward(&x_hat, Mode::Train)?.output;
            let (cost, _) = wgan_costs_var(&d_real, &d_fake)?;
            let gp = gradient_penalty(
                |v: &Var| Ok(d.forward(v, Mode::Train)?.output),
                &real,
                x_hat.value(),
                lambda,
                &mut rng,
            )?;
            let d_loss = cost.add(&gp)?;
            finite(d_loss.item(), "critic loss", epoch, step)?;
            let grads = grad(&d_loss, &d.param_refs(), false)?;
            apply_adam(&mut d, &mut o_d, &grads)?;

            let z = g_e.forward(&x, Mode::Train)?.output;
            let x_hat = g_d.forward(&z, Mode::Train)?.output;
            let z_hat = e.forward(&x_hat, Mode::Train)?.output;
            let f_x = d.forward_eval(&x)?.features.expect("critic features").detach();
            let f_hat = d.forward_eval(&x_hat)?.features.expect("critic features");
            let adv = mean_l2(&f_x.sub(&f_hat)?)?;
            let con = mean_l1(&x.sub(&x_hat)?);
            let enc = mean_l2(&z.sub(&z_hat)?)?;
            let loss = adv.scale(w.w_adv as f32).add(&con.scale(w.w_con as f32))?.add(&enc.scale(w.w_enc as f32))?;
            step_losses.push(finite(loss.item(), "generator loss", epoch, step)?);
            let (n_ge, n_gd) = (g_e.params().len(), g_d.params().len());
            let mut refs = g_e.param_refs();
            refs.extend(g_d.param_refs());
            refs.extend(e.param_refs());
            let grads = grad(&loss, &refs, false)?;
            apply_adam(&mut g_e, &mut o_ge, &grads[..n_ge])?;
            apply_adam(&mut g_d, &mut o_gd, &grads[n_ge..n_ge + n_gd])?;
            apply_adam(&mut e, &mut o_e, &grads[n_ge + n_gd..])?;
        }
    }
    Ok(GanomalyModel { g_e, g_d, e, d, step_losses })
}
