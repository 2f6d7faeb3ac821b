//! Gradient penalty on the critic's input gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfanogan_autograd::{grad, Tensor, Var};

use super::{ModelError, Result};

/// Keeps the norm differentiable where the gradient vanishes.
const NORM_EPS: f32 = 1e-12;

/// One mixing weight per sample, drawn from `U[0, 1)`.
pub fn sample_alphas<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f32> {
    (0..n).map(|_| rng.random::<f32>()).collect()
}

/// `lambda * mean_i (||grad critic(x_hat_i)||_2 - 1)^2` with
/// `x_hat_i = alpha_i * real_i + (1 - alpha_i) * fake_i`.
///
/// The returned value is part of the graph (second-order) so it can be added
/// to the critic loss and differentiated with respect to the critic weights.
/// `real` and `fake` are treated as constants.
pub fn gradient_penalty_with_alphas<F>(
    mut critic: F,
    real: &Tensor,
    fake: &Tensor,
    alphas: &[f32],
    lambda: f32,
) -> Result<Var>
where
    F: FnMut(&Var) -> Result<Var>,
{
    if real.shape() != fake.shape() {
        return Err(ModelError::BatchMismatch(real.shape().to_vec(), fake.shape().to_vec()));
    }
    let n = *real.shape().first().ok_or(ModelError::EmptyBatch)?;
    if n == 0 || real.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    if alphas.len() != n {
        return Err(ModelError::BatchMismatch(vec![alphas.len()], vec![n]));
    }
    let per = real.len() / n;
    let mut mixed = real.clone();
    for (i, chunk) in mixed.data_mut().chunks_mut(per).enumerate() {
        let a = alphas[i];
        let f = &fake.data()[i * per..(i + 1) * per];
        for (m, &fv) in chunk.iter_mut().zip(f) {
            *m = a * *m + (1.0 - a) * fv;
        }
    }
    let x_hat = Var::param(mixed);
    let out = critic(&x_hat)?;
    let g = grad(&out.sum(), &[&x_hat], true)?.remove(0);
    if !g.value().all_finite() {
        return Err(ModelError::NonDifferentiable);
    }
    let mut per_sample = vec![1usize; real.shape().len()];
    per_sample[0] = n;
    let norm = g.square().sum_to(&per_sample)?.add_scalar(NORM_EPS).sqrt();
    Ok(norm.add_scalar(-1.0).square().mean().scale(lambda))
}

/// [`gradient_penalty_with_alphas`] with mixing weights drawn from `rng`.
pub fn gradient_penalty<F, R>(critic: F, real: &Tensor, fake: &Tensor, lambda: f32, rng: &mut R) -> Result<Var>
where
    F: FnMut(&Var) -> Result<Var>,
    R: Rng + ?Sized,
{
    let n = real.shape().first().copied().unwrap_or(0);
    let alphas = sample_alphas(n, rng);
    gradient_penalty_with_alphas(critic, real, fake, &alphas, lambda)
}

/// Penalty value with mixing weights seeded by `seed`.
pub fn gradient_penalty_value<F>(critic: F, real: &Tensor, fake: &Tensor, lambda: f32, seed: u64) -> Result<f64>
where
    F: FnMut(&Var) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(gradient_penalty(critic, real, fake, lambda, &mut rng)?.item() as f64)
}
