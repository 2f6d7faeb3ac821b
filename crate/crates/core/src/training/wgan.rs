//! Critic/generator training with the gradient penalty and fidelity-driven checkpoints.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfanogan_autograd::{grad, no_grad, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{FidelityFeatures, TrainingConfig};
use super::{
    adam_for, apply_adam, epoch_batches, finite, frames_tensor, gather, latent_batch, stream, Result, TrainingError,
};
use crate::ganmodels::{
    build_network_with, gradient_penalty, wgan_costs_var, ArchOptions, Mode, Model, Network, Role, LATENT_DIM,
};
use crate::metrics::{fidelity_report, FidelityMeasure, FidelityReport};
use crate::rfdata::IqFrame;

const EVAL_CHUNK: usize = 256;

/// Means over one epoch's updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// `mean D(fake) - mean D(real)`, without the penalty.
    pub critic_cost: f64,
    pub gradient_penalty: f64,
    /// `None` if no generator update happened in this epoch.
    pub generator_cost: Option<f64>,
    /// `mean D(real) - mean D(fake)`.
    pub wasserstein: f64,
}

#[derive(Clone, Debug)]
pub struct WganOutcome {
    pub arch: ArchOptions,
    pub checkpoints: Vec<Checkpoint>,
    pub history: Vec<EpochStats>,
    /// Training-set rows used as the real side of every fidelity evaluation.
    pub eval_indices: Vec<usize>,
}

impl WganOutcome {
    pub fn generator(&self, ckpt: &Checkpoint) -> Result<Network> {
        Ok(Network::from_blob(build_network_with(Role::Generator, self.arch)?, &ckpt.generator)?)
    }

    pub fn critic(&self, ckpt: &Checkpoint) -> Result<Network> {
        Ok(Network::from_blob(build_network_with(Role::Critic, self.arch)?, &ckpt.critic)?)
    }
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    let n = t.shape()[0];
    let per = t.len() / n.max(1);
    t.data().chunks(per).map(|c| c.iter().map(|&v| v as f64).collect()).collect()
}

struct Evaluator {
    real: Tensor,
    z: Tensor,
}

impl Evaluator {
    fn features(&self, c: &Network, x: &Tensor, kind: FidelityFeatures) -> Result<Vec<Vec<f64>>> {
        match kind {
            FidelityFeatures::Raw => Ok(rows(x)),
            FidelityFeatures::Critic => {
                let mut out = Vec::new();
                for s in (0..x.shape()[0]).step_by(EVAL_CHUNK) {
                    let xb = Var::constant(x.slice_outer(s, (s + EVAL_CHUNK).min(x.shape()[0])));
                    let f = c.forward_eval(&xb)?.features.expect("critic has a feature layer");
                    out.extend(rows(f.value()));
                }
                Ok(out)
            }
        }
    }

    fn run(&self, g: &Network, c: &Network, cfg: &TrainingConfig) -> Result<FidelityReport> {
        no_grad(|| {
            let n = self.z.shape()[0];
            let mut data = Vec::new();
            let mut shape = vec![n];
            for s in (0..n).step_by(EVAL_CHUNK) {
                let zb = Var::constant(self.z.slice_outer(s, (s + EVAL_CHUNK).min(n)));
                let out = g.forward_eval(&zb)?.output;
                shape.truncate(1);
                shape.extend_from_slice(&out.shape()[1..]);
                data.extend_from_slice(out.value().data());
            }
            let fake = Tensor::new(&shape, data)?;
            let real_f = self.features(c, &self.real, cfg.fidelity_features)?;
            let fake_f = self.features(c, &fake, cfg.fidelity_features)?;
            Ok(fidelity_report(&real_f, &fake_f, cfg.fidelity_k, cfg.jsd_bins)?)
        })
    }
}

/// [`train_wgan_gp_with`] without a progress callback.
pub fn train_wgan_gp(frames: &[IqFrame], cfg: &TrainingConfig) -> Result<WganOutcome> {
    train_wgan_gp_with(frames, cfg, |_| {})
}

/// Trains a generator and critic on `frames`.
///
/// Each mini-batch is one critic update on `mean D(fake) - mean D(real)` plus
/// the gradient penalty; every `n_critic`-th critic update is followed by a
/// generator update on `-mean D(G(z))`. Fidelity is measured every
/// `eval_every` epochs and at the last epoch (at epoch 0 when `epochs` is 0)
/// between a fixed subset of the training frames and samples from a fixed set
/// of latents. A checkpoint is kept whenever any measure improves on its best
/// so far, and always for the last epoch. `progress` sees every epoch's stats.
pub fn train_wgan_gp_with(
    frames: &[IqFrame],
    cfg: &TrainingConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<WganOutcome> {
    cfg.validate()?;
    let data = frames_tensor(frames)?;
    let n = data.shape()[0];
    let arch = ArchOptions { frame_width: frames[0].width(), channel_divisor: cfg.channel_divisor };
    let mut g = Network::new(
        build_network_with(Role::Generator, arch)?,
        &mut ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::INIT_G)),
    )?;
    let mut c = Network::new(
        build_network_with(Role::Critic, arch)?,
        &mut ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::INIT_D)),
    )?;
    let mut batch_rng = ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::BATCHES));
    let mut latent_rng = ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::LATENT));

    let mut eval_rng = ChaCha8Rng::seed_from_u64(stream::seed(cfg.seed, stream::EVAL));
    let n_eval = cfg.eval_samples.min(n);
    let mut eval_indices = rand::seq::index::sample(&mut eval_rng, n, n_eval).into_vec();
    eval_indices.sort_unstable();
    let evaluator =
        Evaluator { real: gather(&data, &eval_indices), z: latent_batch(n_eval, LATENT_DIM, &mut eval_rng) };

    let mut opt_g = adam_for(cfg);
    let mut opt_c = adam_for(cfg);
    let mut best: Vec<(FidelityMeasure, Option<f64>)> = FidelityMeasure::ALL.iter().map(|&m| (m, None)).collect();
    let mut checkpoints = Vec::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut critic_updates = 0usize;

    let mut evaluate = |epoch: usize, g: &Network, c: &Network, checkpoints: &mut Vec<Checkpoint>| -> Result<()> {
        let report = evaluator.run(g, c, cfg)?;
        let mut improved = Vec::new();
        for (m, b) in best.iter_mut() {
            let v = report.get(*m);
            if b.is_none_or(|old| m.improves(v, old)) {
                *b = Some(v);
                improved.push(*m);
            }
        }
        if !improved.is_empty() || epoch == cfg.epochs {
            checkpoints.push(Checkpoint {
                epoch,
                generator: g.to_blob(),
                critic: c.to_blob(),
                encoder: None,
                fidelity: report,
                improved,
                path: None,
            });
        }
        Ok(())
    };

    if cfg.epochs == 0 {
        evaluate(0, &g, &c, &mut checkpoints)?;
    }
    let lambda = cfg.gp_lambda as f32;
    for epoch in 1..=cfg.epochs {
        let (mut sum_c, mut sum_gp, mut sum_w, mut sum_g) = (0.0, 0.0, 0.0, 0.0);
        let (mut n_c, mut n_g) = (0usize, 0usize);
        for (step, idx) in epoch_batches(n, cfg.batch_size, &mut batch_rng).into_iter().enumerate() {
            let real = gather(&data, &idx);
            let b = idx.len();
            let z = Var::constant(latent_batch(b, LATENT_DIM, &mut latent_rng));
            let fake = no_grad(|| g.forward(&z, Mode::Train))?.output.value().clone();

            let d_real = c.forward(&Var::constant(real.clone()), Mode::Train)?.output;
            let d_fake = c.forward(&Var::constant(fake.clone()), Mode::Train)?.output;
            let (cost, _) = wgan_costs_var(&d_real, &d_fake)?;
            let gp = gradient_penalty(
                |x: &Var| Ok(c.forward(x, Mode::Train)?.output),
                &real,
                &fake,
                lambda,
                &mut latent_rng,
            )?;
            let loss = cost.add(&gp)?;
            finite(loss.item(), "critic loss", epoch, step)?;
            let grads = grad(&loss, &c.param_refs(), false)?;
            apply_adam(&mut c, &mut opt_c, &grads)?;
            sum_c += cost.item() as f64;
            sum_gp += gp.item() as f64;
            sum_w += -(cost.item() as f64);
            n_c += 1;
            critic_updates += 1;

            if critic_updates.is_multiple_of(cfg.n_critic) {
                let z = Var::constant(latent_batch(b, LATENT_DIM, &mut latent_rng));
                let fake = g.forward(&z, Mode::Train)?.output;
                let d_fake = c.forward(&fake, Mode::Train)?.output;
                let g_cost = d_fake.mean().neg();
                sum_g += finite(g_cost.item(), "generator loss", epoch, step)?;
                let grads = grad(&g_cost, &g.param_refs(), false)?;
                apply_adam(&mut g, &mut opt_g, &grads)?;
                n_g += 1;
            }
        }
        let stats = EpochStats {
            epoch,
            critic_cost: sum_c / n_c as f64,
            gradient_penalty: sum_gp / n_c as f64,
            generator_cost: (n_g > 0).then(|| sum_g / n_g as f64),
            wasserstein: sum_w / n_c as f64,
        };
        progress(&stats);
        history.push(stats);
        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            evaluate(epoch, &g, &c, &mut checkpoints)?;
        }
    }
    if checkpoints.is_empty() {
        return Err(TrainingError::EmptyHistory);
    }
    Ok(WganOutcome { arch, checkpoints, history, eval_indices })
}
