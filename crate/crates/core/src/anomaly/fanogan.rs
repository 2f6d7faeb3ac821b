//! Single-pass encoder scoring.

use rfanogan_autograd::{no_grad, Tensor, Var};

use super::{AnomalyError, AnomalyScore, Result};
use crate::ganmodels::{frames_to_batch, Model, ModelError};
use crate::rfdata::IqFrame;

const SCORE_CHUNK: usize = 256;

/// Mean over each sample's entries of `(a - b)^2`, in f64.
pub(crate) fn per_sample_mse(a: &Tensor, b: &Tensor) -> Result<Vec<f64>> {
    if a.shape() != b.shape() || a.shape().is_empty() {
        return Err(ModelError::BatchMismatch(a.shape().to_vec(), b.shape().to_vec()).into());
    }
    let n = a.shape()[0];
    if n == 0 {
        return Ok(Vec::new());
    }
    let per = a.len() / n;
    Ok(a.data()
        .chunks(per)
        .zip(b.data().chunks(per))
        .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| (p as f64 - q as f64).powi(2)).sum::<f64>() / per as f64)
        .collect())
}

/// Critic features `f(x)`, or the critic output for models without a feature layer.
pub(crate) fn features<D: Model>(d: &D, x: &Var) -> Result<Var> {
    let out = d.forward_eval(x)?;
    Ok(out.features.unwrap_or(out.output))
}

/// Score arithmetic on already computed tensors:
/// `mean (x - recon)^2 + kappa * mean (f(x) - f(recon))^2` per sample.
pub fn fanogan_score_parts(x: &Tensor, recon: &Tensor, f_x: &Tensor, f_recon: &Tensor, kappa: f64) -> Result<Vec<f64>> {
    let r = per_sample_mse(x, recon)?;
    let f = per_sample_mse(f_x, f_recon)?;
    if r.len() != f.len() {
        return Err(AnomalyError::LengthMismatch(r.len(), f.len()));
    }
    Ok(r.iter().zip(&f).map(|(a, b)| a + kappa * b).collect())
}

/// Scores a batch `x` with encoder `e`, generator `g` and critic `d`, all in inference mode.
pub fn fanogan_scores<G: Model, E: Model, D: Model>(x: &Tensor, g: &G, e: &E, d: &D, kappa: f64) -> Result<Vec<f64>> {
    no_grad(|| {
        let mut out = Vec::with_capacity(x.shape().first().copied().unwrap_or(0));
        let n = x.shape().first().copied().ok_or(ModelError::EmptyBatch)?;
        for start in (0..n).step_by(SCORE_CHUNK) {
            let xb = Var::constant(x.slice_outer(start, (start + SCORE_CHUNK).min(n)));
            let z = e.forward_eval(&xb)?.output;
            let recon = g.forward_eval(&z)?.output;
            let fx = features(d, &xb)?;
            let fr = features(d, &recon)?;
            out.extend(fanogan_score_parts(xb.value(), recon.value(), fx.value(), fr.value(), kappa)?);
        }
        Ok(out)
    })
}

/// Score of one frame; see [`fanogan_scores`].
pub fn fanogan_score<G: Model, E: Model, D: Model>(
    frame: &IqFrame,
    g: &G,
    e: &E,
    d: &D,
    kappa: f64,
) -> Result<AnomalyScore> {
    let x = frames_to_batch(&[frame])?;
    Ok(AnomalyScore::new(fanogan_scores(&x, g, e, d, kappa)?[0]))
}

/// Per-sample mean squared reconstruction error of an autoencoder.
pub fn reconstruction_errors<A: Model>(net: &A, x: &Tensor) -> Result<Vec<f64>> {
    no_grad(|| {
        let n = x.shape().first().copied().ok_or(ModelError::EmptyBatch)?;
        let mut out = Vec::with_capacity(n);
        for start in (0..n).step_by(SCORE_CHUNK) {
            let xb = x.slice_outer(start, (start + SCORE_CHUNK).min(n));
            let recon = net.forward_eval(&Var::constant(xb.clone()))?.output;
            out.extend(per_sample_mse(&xb, recon.value())?);
        }
        Ok(out)
    })
}
