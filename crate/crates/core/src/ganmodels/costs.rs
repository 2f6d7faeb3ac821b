//! Batch cost functions for the GAN variants.
//!
//! Inputs are per-sample critic or discriminator outputs. Batches are reduced
//! by their own means, so real and fake batches may differ in length.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use rfanogan_autograd::Var;

use super::{ModelError, Result};

const PROB_CLAMP: f64 = 1e-12;

/// Which generator objective `gan_costs` reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorVariant {
    /// Minimise `log(1 - D(G(z)))`.
    Saturating,
    /// Minimise `-log D(G(z))`.
    #[default]
    NonSaturating,
}

impl FromStr for GeneratorVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "saturating" => Ok(Self::Saturating),
            "non-saturating" | "nonsaturating" => Ok(Self::NonSaturating),
            other => Err(format!("unknown generator variant: {other}")),
        }
    }
}

/// Cost minimised by the critic (or discriminator) and by the generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostPair {
    pub critic: f64,
    pub generator: f64,
}

fn nonempty(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        Err(ModelError::EmptyBatch)
    } else {
        Ok(())
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Minimax cross-entropy costs.
///
/// `J_D = -(mean log d_real + mean log(1 - d_fake))`. The generator cost is
/// `-mean log(1 - d_fake)` for [`GeneratorVariant::Saturating`] (the negated
/// discriminator term) and `-mean log d_fake` for the non-saturating form.
/// Probabilities are clamped `1e-12` away from 0 and 1.
pub fn gan_costs(d_real: &[f64], d_fake: &[f64], variant: GeneratorVariant) -> Result<CostPair> {
    nonempty(d_real, d_fake)?;
    let log_real = mean(d_real.iter().map(|&p| clamp_prob(p).ln()));
    let log_not_fake = mean(d_fake.iter().map(|&p| (1.0 - clamp_prob(p)).ln()));
    let generator = match variant {
        GeneratorVariant::Saturating => -log_not_fake,
        GeneratorVariant::NonSaturating => -mean(d_fake.iter().map(|&p| clamp_prob(p).ln())),
    };
    Ok(CostPair { critic: -(log_real + log_not_fake), generator })
}

/// Conditional GAN costs. Conditioning happens before the discriminator, so the
/// arithmetic is that of [`gan_costs`] with the non-saturating generator.
pub fn cgan_costs(d_real_cond: &[f64], d_fake_cond: &[f64]) -> Result<CostPair> {
    gan_costs(d_real_cond, d_fake_cond, GeneratorVariant::NonSaturating)
}

/// Least-squares costs with real label `a`, fake label `b` and generator target `c`.
pub fn lsgan_costs(d_real: &[f64], d_fake: &[f64], a: f64, b: f64, c: f64) -> Result<CostPair> {
    nonempty(d_real, d_fake)?;
    let critic = mean(d_real.iter().map(|d| (d - a).powi(2))) + mean(d_fake.iter().map(|d| (d - b).powi(2)));
    let generator = mean(d_fake.iter().map(|d| (d - c).powi(2)));
    Ok(CostPair { critic, generator })
}

/// Wasserstein costs: the critic minimises `mean d_fake - mean d_real`, the
/// generator minimises `-mean d_fake`.
pub fn wgan_costs(d_real: &[f64], d_fake: &[f64]) -> Result<CostPair> {
    nonempty(d_real, d_fake)?;
    let fake = mean(d_fake.iter().copied());
    Ok(CostPair { critic: fake - mean(d_real.iter().copied()), generator: -fake })
}

/// Differentiable Wasserstein costs on critic outputs: `(critic_cost, generator_cost)`.
pub fn wgan_costs_var(d_real: &Var, d_fake: &Var) -> Result<(Var, Var)> {
    if d_real.value().is_empty() || d_fake.value().is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let fake = d_fake.mean();
    Ok((fake.sub(&d_real.mean())?, fake.neg()))
}
