//! Small hand-built models for exercising scoring and training code paths.
#![allow(dead_code)]

use std::cell::Cell;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rfanogan::ganmodels::{Forward, Mode, Model, ModelError};
use rfanogan_autograd::{Tensor, Var};

/// `y = x W^T` on flattened samples, reshaped to `out_shape`. Features are `y` itself.
#[derive(Clone)]
pub struct Linear {
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    params: Vec<Var>,
}

impl Linear {
    pub fn new(in_shape: &[usize], out_shape: &[usize], weight: Tensor) -> Self {
        let n_in: usize = in_shape.iter().product();
        let n_out: usize = out_shape.iter().product();
        assert_eq!(weight.shape(), &[n_out, n_in]);
        Self { in_shape: in_shape.to_vec(), out_shape: out_shape.to_vec(), params: vec![Var::param(weight)] }
    }

    pub fn identity(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        let mut w = Tensor::zeros(&[n, n]);
        for i in 0..n {
            w.data_mut()[i * n + i] = 1.0;
        }
        Self::new(shape, shape, w)
    }

    /// `c * identity`.
    pub fn scaled(shape: &[usize], c: f32) -> Self {
        let mut m = Self::identity(shape);
        let w = m.params[0].value().map(|v| v * c);
        m.params = vec![Var::param(w)];
        m
    }

    pub fn weight(&self) -> &Tensor {
        self.params[0].value()
    }

    fn run(&self, x: &Var) -> Result<Forward, ModelError> {
        let n = x.shape()[0];
        let n_in: usize = self.in_shape.iter().product();
        let y = x.reshape(&[n, n_in])?.matmul_t(&self.params[0], false, true)?;
        let mut shape = vec![n];
        shape.extend(&self.out_shape);
        let y = y.reshape(&shape)?;
        Ok(Forward { output: y.clone(), features: Some(y) })
    }
}

impl Model for Linear {
    fn forward(&mut self, x: &Var, _mode: Mode) -> Result<Forward, ModelError> {
        self.run(x)
    }

    fn forward_eval(&self, x: &Var) -> Result<Forward, ModelError> {
        self.run(x)
    }

    fn params(&self) -> &[Var] {
        &self.params
    }

    fn set_param_tensors(&mut self, values: Vec<Tensor>) -> Result<(), ModelError> {
        self.params = values.into_iter().map(Var::param).collect();
        Ok(())
    }

    fn param_hash(&self) -> String {
        let mut h = DefaultHasher::new();
        for p in &self.params {
            for v in p.value().data() {
                v.to_bits().hash(&mut h);
            }
        }
        format!("{:016x}", h.finish())
    }

    fn input_shape(&self) -> Vec<usize> {
        self.in_shape.clone()
    }
}

/// A [`Linear`] that updates internal state on every inference pass, like a
/// batch-norm layer left collecting statistics. Its state is part of its hash.
pub struct Drifting {
    pub inner: Linear,
    updates: Cell<u64>,
}

impl Drifting {
    pub fn new(inner: Linear) -> Self {
        Self { inner, updates: Cell::new(0) }
    }
}

impl Model for Drifting {
    fn forward(&mut self, x: &Var, mode: Mode) -> Result<Forward, ModelError> {
        self.updates.set(self.updates.get() + 1);
        self.inner.forward(x, mode)
    }

    fn forward_eval(&self, x: &Var) -> Result<Forward, ModelError> {
        self.updates.set(self.updates.get() + 1);
        self.inner.forward_eval(x)
    }

    fn params(&self) -> &[Var] {
        self.inner.params()
    }

    fn set_param_tensors(&mut self, values: Vec<Tensor>) -> Result<(), ModelError> {
        self.inner.set_param_tensors(values)
    }

    fn param_hash(&self) -> String {
        format!("{}-{}", self.inner.param_hash(), self.updates.get())
    }

    fn input_shape(&self) -> Vec<usize> {
        self.inner.input_shape()
    }
}
