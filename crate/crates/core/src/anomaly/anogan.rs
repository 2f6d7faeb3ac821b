//! Iterative latent search: find the latent whose generated frame best explains `x`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfanogan_autograd::{grad, no_grad, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::fanogan::features;
use super::{AnomalyError, AnomalyScore, Result};
use crate::ganmodels::{Model, ModelError};

const MAX_HALVINGS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnoganParams {
    /// Weight of the feature term; the residual gets `1 - lambda`.
    pub lambda: f64,
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Halve the step until the loss does not increase.
    pub backtracking: bool,
}

impl Default for AnoganParams {
    fn default() -> Self {
        Self { lambda: 0.1, steps: 100, step_size: 0.01, seed: 0, backtracking: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnoganResult {
    pub score: AnomalyScore,
    /// L1 residual `|x - G(z)|_1` at the final latent.
    pub residual: f64,
    /// L1 feature distance at the final latent.
    pub feature_distance: f64,
    /// Loss at the starting latent and after every step taken.
    pub trace: Vec<f64>,
    pub z_init: Tensor,
    pub z_final: Tensor,
}

struct Eval {
    loss: Var,
    residual: f64,
    feature: f64,
}

fn evaluate<G: Model, D: Model>(g: &G, d: &D, x: &Var, f_x: &Tensor, z: &Var, lambda: f64) -> Result<Eval> {
    let gz = g.forward_eval(z)?.output;
    if gz.shape() != x.shape() {
        return Err(ModelError::BatchMismatch(x.shape().to_vec(), gz.shape().to_vec()).into());
    }
    let f_gz = features(d, &gz)?;
    let residual = x.sub(&gz)?.abs().sum();
    let feature = Var::constant(f_x.clone()).sub(&f_gz)?.abs().sum();
    let loss = residual.scale((1.0 - lambda) as f32).add(&feature.scale(lambda as f32))?;
    Ok(Eval { residual: residual.item() as f64, feature: feature.item() as f64, loss })
}

/// Latent search score for a single sample `x` of shape `[1, ..]`.
///
/// Starts from `z ~ U[-1, 1]^latent` and takes `steps` projected gradient steps
/// on `L(z) = (1 - lambda) |x - G(z)|_1 + lambda |f(x) - f(G(z))|_1`, keeping
/// `z` inside `[-1, 1]`. Stops early when the loss reaches 0 or, with
/// backtracking, when no step size decreases it. `G` and `D` are not modified.
pub fn anogan_score<G: Model, D: Model>(x: &Tensor, g: &G, d: &D, p: &AnoganParams) -> Result<AnoganResult> {
    if p.steps < 1 {
        return Err(AnomalyError::Steps(p.steps));
    }
    if !(p.lambda > 0.0 && p.lambda < 1.0) {
        return Err(AnomalyError::Lambda(p.lambda));
    }
    let x = Var::constant(x.clone());
    let f_x = no_grad(|| features(d, &x))?.value().clone();
    let mut z_shape = vec![x.shape()[0]];
    z_shape.extend(g.input_shape());
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let z_init = Tensor::uniform(&z_shape, -1.0, 1.0, &mut rng);

    let mut z = Var::param(z_init.clone());
    let mut cur = evaluate(g, d, &x, &f_x, &z, p.lambda)?;
    let mut trace = vec![cur.loss.item() as f64];
    for _ in 0..p.steps {
        if cur.loss.item() == 0.0 {
            break;
        }
        let gz = grad(&cur.loss, &[&z], false)?.remove(0);
        if !gz.value().all_finite() {
            return Err(AnomalyError::NonFinite("latent gradient"));
        }
        let mut step = p.step_size as f32;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = z.value().zip_map(gz.value(), |zi, gi| (zi - step * gi).clamp(-1.0, 1.0));
            let cand = Var::param(cand);
            let next = evaluate(g, d, &x, &f_x, &cand, p.lambda)?;
            if !p.backtracking || next.loss.item() <= cur.loss.item() {
                accepted = Some((cand, next));
                break;
            }
            step *= 0.5;
        }
        let Some((nz, next)) = accepted else { break };
        z = nz;
        cur = next;
        trace.push(cur.loss.item() as f64);
    }
    Ok(AnoganResult {
        score: AnomalyScore::new(cur.loss.item() as f64),
        residual: cur.residual,
        feature_distance: cur.feature,
        trace,
        z_init,
        z_final: z.value().clone(),
    })
}
