//! Encoder-decoder-encoder losses and the latent-mismatch score.

use rfanogan_autograd::{no_grad, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::{AnomalyError, AnomalyScore, Result};
use crate::ganmodels::{Model, ModelError};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Weights of the adversarial, contextual and encoder losses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanomalyWeights {
    pub w_adv: f64,
    pub w_con: f64,
    pub w_enc: f64,
}

impl GanomalyWeights {
    pub fn new(w_adv: f64, w_con: f64, w_enc: f64) -> Result<Self> {
        let ok = [w_adv, w_con, w_enc].iter().all(|w| (0.0..=1.0).contains(w))
            && (w_adv + w_con + w_enc - 1.0).abs() <= WEIGHT_SUM_TOL;
        if !ok {
            return Err(AnomalyError::Weights(w_adv, w_con, w_enc));
        }
        Ok(Self { w_adv, w_con, w_enc })
    }
}

impl Default for GanomalyWeights {
    fn default() -> Self {
        Self { w_adv: 0.05, w_con: 0.90, w_enc: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanomalyLosses {
    /// `|f(x) - f(x_hat)|_2`
    pub adv: f64,
    /// `|x - x_hat|_1`
    pub con: f64,
    /// `|z - z_hat|_2`
    pub enc: f64,
    pub total: f64,
}

fn l1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(AnomalyError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

fn l2(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(AnomalyError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

pub fn ganomaly_losses(
    x: &[f64],
    x_hat: &[f64],
    z: &[f64],
    z_hat: &[f64],
    f_x: &[f64],
    f_x_hat: &[f64],
    w: &GanomalyWeights,
) -> Result<GanomalyLosses> {
    GanomalyWeights::new(w.w_adv, w.w_con, w.w_enc)?;
    let adv = l2(f_x, f_x_hat)?;
    let con = l1(x, x_hat)?;
    let enc = l2(z, z_hat)?;
    Ok(GanomalyLosses { adv, con, enc, total: w.w_adv * adv + w.w_con * con + w.w_enc * enc })
}

/// `|z - z_hat|_1`: the latent code of the input against the code of its reconstruction.
pub fn ganomaly_score_from_latents(z: &[f64], z_hat: &[f64]) -> Result<AnomalyScore> {
    Ok(AnomalyScore::new(l1(z, z_hat)?))
}

/// Per-sample scores for a batch: `z = G_E(x)`, `x_hat = G_D(z)`, score `|z - E(x_hat)|_1`.
pub fn ganomaly_score<GE: Model, GD: Model, E: Model>(x: &Tensor, g_e: &GE, g_d: &GD, e: &E) -> Result<Vec<f64>> {
    no_grad(|| {
        let xv = Var::constant(x.clone());
        let z = g_e.forward_eval(&xv)?.output;
        let x_hat = g_d.forward_eval(&z)?.output;
        if x_hat.shape() != x.shape() {
            return Err(ModelError::BatchMismatch(x.shape().to_vec(), x_hat.shape().to_vec()).into());
        }
        let z_hat = e.forward_eval(&x_hat)?.output;
        if z_hat.shape() != z.shape() {
            return Err(ModelError::BatchMismatch(z.shape().to_vec(), z_hat.shape().to_vec()).into());
        }
        let n = z.shape()[0];
        let per = z.value().len() / n.max(1);
        Ok(z.value()
            .data()
            .chunks(per)
            .zip(z_hat.value().data().chunks(per))
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (*p as f64 - *q as f64).abs()).sum())
            .collect())
    })
}
