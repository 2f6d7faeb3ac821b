//! Adam optimizer over plain tensors.

use crate::error::{AutogradError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    step: u32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f32, beta1: f32, beta2: f32) -> Self {
        Self { lr, beta1, beta2, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps_taken(&self) -> u32 {
        self.step
    }

    /// Applies one bias-corrected Adam update to `params` in place.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(AutogradError::OptimizerState(format!("{} params but {} grads", params.len(), grads.len())));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(AutogradError::OptimizerState(format!(
                "initialised for {} params, called with {}",
                self.m.len(),
                params.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let step_size = self.lr / bc1;
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(AutogradError::OptimizerState(format!("param {:?} vs grad {:?}", p.shape(), g.shape())));
            }
            let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
            for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mv = b1 * *mv + (1.0 - b1) * gv;
                *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                *pv -= step_size * *mv / ((*vv / bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
