//! Graph nodes and reverse-mode differentiation.
//!
//! Every backward rule is written in terms of [`Var`] operations, so running
//! [`grad`] with `create_graph = true` records the backward pass itself and the
//! resulting gradients can be differentiated again.

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::conv::{self, ConvGeom};
use crate::error::{AutogradError, Result};
use crate::tensor::{self, Tensor};

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
    static NO_GRAD: Cell<u32> = const { Cell::new(0) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

fn grad_enabled() -> bool {
    NO_GRAD.with(|c| c.get() == 0)
}

/// Disables graph recording on the current thread while alive.
pub struct NoGradGuard(());

impl NoGradGuard {
    pub fn new() -> Self {
        NO_GRAD.with(|c| c.set(c.get() + 1));
        Self(())
    }
}

impl Default for NoGradGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        NO_GRAD.with(|c| c.set(c.get() - 1));
    }
}

/// Runs `f` without recording any graph.
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    let _guard = NoGradGuard::new();
    f()
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f32),
    AddScalar(Var),
    MulConst(Var, Tensor),
    Sqrt(Var),
    Rsqrt(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    SumAll(Var),
    SumTo(Var),
    BroadcastTo(Var),
    Reshape(Var),
    MatMul(Var, Var, bool, bool),
    Conv(Var, Var, ConvGeom),
    ConvT(Var, Var, ConvGeom),
    ConvW(Var, Var, ConvGeom),
}

impl Op {
    fn parents(&self) -> Vec<&Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | MatMul(a, b, _, _) => vec![a, b],
            Conv(a, b, _) | ConvT(a, b, _) | ConvW(a, b, _) => vec![a, b],
            Neg(a)
            | Scale(a, _)
            | AddScalar(a)
            | MulConst(a, _)
            | Sqrt(a)
            | Rsqrt(a)
            | Tanh(a)
            | Sigmoid(a)
            | Softplus(a)
            | SumAll(a)
            | SumTo(a)
            | BroadcastTo(a)
            | Reshape(a) => {
                vec![a]
            }
        }
    }
}

struct Node {
    id: u64,
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// A value in the computation graph.
#[derive(Clone)]
pub struct Var(Rc<Node>);

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var").field("shape", &self.shape()).field("requires_grad", &self.0.requires_grad).finish()
    }
}

impl Var {
    fn from_op(value: Tensor, op: Op) -> Self {
        let requires_grad = grad_enabled() && op.parents().iter().any(|p| p.requires_grad());
        let op = if requires_grad { op } else { Op::Leaf };
        Var(Rc::new(Node { id: next_id(), value, requires_grad, op }))
    }

    /// A leaf that gradients can be taken with respect to.
    pub fn param(value: Tensor) -> Self {
        Var(Rc::new(Node { id: next_id(), value, requires_grad: true, op: Op::Leaf }))
    }

    /// A leaf that is treated as a constant.
    pub fn constant(value: Tensor) -> Self {
        Var(Rc::new(Node { id: next_id(), value, requires_grad: false, op: Op::Leaf }))
    }

    pub fn value(&self) -> &Tensor {
        &self.0.value
    }

    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// A constant copy of this value, cut from the graph.
    pub fn detach(&self) -> Var {
        Var::constant(self.0.value.clone())
    }

    pub fn item(&self) -> f32 {
        self.0.value.item()
    }

    fn same_shape(&self, other: &Var, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(AutogradError::ShapeMismatch(format!("{what}: {:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }

    pub fn add(&self, other: &Var) -> Result<Var> {
        self.same_shape(other, "add")?;
        let v = self.value().zip_map(other.value(), |a, b| a + b);
        Ok(Var::from_op(v, Op::Add(self.clone(), other.clone())))
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        self.same_shape(other, "sub")?;
        let v = self.value().zip_map(other.value(), |a, b| a - b);
        Ok(Var::from_op(v, Op::Sub(self.clone(), other.clone())))
    }

    pub fn mul(&self, other: &Var) -> Result<Var> {
        self.same_shape(other, "mul")?;
        let v = self.value().zip_map(other.value(), |a, b| a * b);
        Ok(Var::from_op(v, Op::Mul(self.clone(), other.clone())))
    }

    pub fn div(&self, other: &Var) -> Result<Var> {
        self.same_shape(other, "div")?;
        let v = self.value().zip_map(other.value(), |a, b| a / b);
        Ok(Var::from_op(v, Op::Div(self.clone(), other.clone())))
    }

    pub fn neg(&self) -> Var {
        Var::from_op(self.value().map(|a| -a), Op::Neg(self.clone()))
    }

    pub fn scale(&self, c: f32) -> Var {
        Var::from_op(self.value().map(|a| a * c), Op::Scale(self.clone(), c))
    }

    pub fn add_scalar(&self, c: f32) -> Var {
        Var::from_op(self.value().map(|a| a + c), Op::AddScalar(self.clone()))
    }

    /// Elementwise product with a constant tensor of the same shape.
    pub fn mul_const(&self, c: &Tensor) -> Result<Var> {
        if self.shape() != c.shape() {
            return Err(AutogradError::ShapeMismatch(format!("mul_const: {:?} vs {:?}", self.shape(), c.shape())));
        }
        let v = self.value().zip_map(c, |a, b| a * b);
        Ok(Var::from_op(v, Op::MulConst(self.clone(), c.clone())))
    }

    pub fn square(&self) -> Var {
        self.mul(self).expect("same shape")
    }

    pub fn sqrt(&self) -> Var {
        Var::from_op(self.value().map(f32::sqrt), Op::Sqrt(self.clone()))
    }

    pub fn rsqrt(&self) -> Var {
        Var::from_op(self.value().map(|a| 1.0 / a.sqrt()), Op::Rsqrt(self.clone()))
    }

    pub fn tanh(&self) -> Var {
        Var::from_op(self.value().map(f32::tanh), Op::Tanh(self.clone()))
    }

    pub fn sigmoid(&self) -> Var {
        Var::from_op(self.value().map(sigmoid), Op::Sigmoid(self.clone()))
    }

    /// `ln(1 + e^x)`, evaluated stably.
    pub fn softplus(&self) -> Var {
        Var::from_op(self.value().map(softplus), Op::Softplus(self.clone()))
    }

    /// Leaky rectifier; the slope mask is a constant of the current input.
    pub fn leaky_relu(&self, alpha: f32) -> Var {
        let mask = self.value().map(|a| if a > 0.0 { 1.0 } else { alpha });
        self.mul_const(&mask).expect("same shape")
    }

    /// Elementwise absolute value (subgradient 0 at 0).
    pub fn abs(&self) -> Var {
        let sign = self.value().map(|a| {
            if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                0.0
            }
        });
        self.mul_const(&sign).expect("same shape")
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&self) -> Var {
        Var::from_op(Tensor::scalar(self.value().sum()), Op::SumAll(self.clone()))
    }

    pub fn mean(&self) -> Var {
        let n = self.value().len().max(1) as f32;
        self.sum().scale(1.0 / n)
    }

    /// Sums over axes so the result has `shape` (same rank, reduced axes set to 1).
    pub fn sum_to(&self, shape: &[usize]) -> Result<Var> {
        tensor::check_broadcastable(shape, self.shape())?;
        let v = tensor::sum_to(self.value(), shape);
        Ok(Var::from_op(v, Op::SumTo(self.clone())))
    }

    /// Repeats along axes of size 1 to reach `shape` (same rank).
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Var> {
        tensor::check_broadcastable(self.shape(), shape)?;
        let v = tensor::broadcast_to(self.value(), shape);
        Ok(Var::from_op(v, Op::BroadcastTo(self.clone())))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var> {
        let v = self.value().reshape(shape)?;
        Ok(Var::from_op(v, Op::Reshape(self.clone())))
    }

    /// `op(self) @ op(other)` for 2-D operands.
    pub fn matmul_t(&self, other: &Var, ta: bool, tb: bool) -> Result<Var> {
        let v = tensor::matmul(self.value(), other.value(), ta, tb)?;
        Ok(Var::from_op(v, Op::MatMul(self.clone(), other.clone(), ta, tb)))
    }

    pub fn matmul(&self, other: &Var) -> Result<Var> {
        self.matmul_t(other, false, false)
    }

    /// Convolution of `self` (`[N, C, H, W]`) with `weight` (`[C_out, C, kh, kw]`).
    pub fn conv2d(&self, weight: &Var, geom: &ConvGeom) -> Result<Var> {
        let v = conv::conv2d(self.value(), weight.value(), geom)?;
        Ok(Var::from_op(v, Op::Conv(self.clone(), weight.clone(), *geom)))
    }

    /// Transposed convolution; `geom` describes the forward convolution it is the adjoint of.
    pub fn conv2d_transpose(&self, weight: &Var, geom: &ConvGeom) -> Result<Var> {
        let v = conv::conv2d_transpose(self.value(), weight.value(), geom)?;
        Ok(Var::from_op(v, Op::ConvT(self.clone(), weight.clone(), *geom)))
    }

    fn conv2d_weight(&self, out_grad: &Var, geom: &ConvGeom) -> Result<Var> {
        let v = conv::conv2d_weight(self.value(), out_grad.value(), geom)?;
        Ok(Var::from_op(v, Op::ConvW(self.clone(), out_grad.clone(), *geom)))
    }
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f32) -> f32 {
    if x > 20.0 {
        x
    } else {
        x.max(0.0) + (-x.abs()).exp().ln_1p()
    }
}

/// Contributions of `g` (the gradient of the node's output) to each parent.
fn backward_rule(node: &Node, g: &Var) -> Result<Vec<(Var, Var)>> {
    use Op::*;
    let out = match &node.op {
        Leaf => vec![],
        Add(a, b) => vec![(a.clone(), g.clone()), (b.clone(), g.clone())],
        Sub(a, b) => vec![(a.clone(), g.clone()), (b.clone(), g.neg())],
        Mul(a, b) => vec![(a.clone(), g.mul(b)?), (b.clone(), g.mul(a)?)],
        Div(a, b) => {
            let ga = g.div(b)?;
            let gb = ga.mul(a)?.div(b)?.neg();
            vec![(a.clone(), ga), (b.clone(), gb)]
        }
        Neg(a) => vec![(a.clone(), g.neg())],
        Scale(a, c) => vec![(a.clone(), g.scale(*c))],
        AddScalar(a) => vec![(a.clone(), g.clone())],
        MulConst(a, c) => vec![(a.clone(), g.mul_const(c)?)],
        Sqrt(a) => vec![(a.clone(), g.div(&a.sqrt())?.scale(0.5))],
        Rsqrt(a) => {
            let r = a.rsqrt();
            let r3 = r.mul(&r)?.mul(&r)?;
            vec![(a.clone(), g.mul(&r3)?.scale(-0.5))]
        }
        Tanh(a) => {
            let t = a.tanh();
            let d = t.square().neg().add_scalar(1.0);
            vec![(a.clone(), g.mul(&d)?)]
        }
        Sigmoid(a) => {
            let s = a.sigmoid();
            let d = s.mul(&s.neg().add_scalar(1.0))?;
            vec![(a.clone(), g.mul(&d)?)]
        }
        Softplus(a) => vec![(a.clone(), g.mul(&a.sigmoid())?)],
        SumAll(a) => {
            let ones: Vec<usize> = vec![1; a.shape().len()];
            vec![(a.clone(), g.reshape(&ones)?.broadcast_to(a.shape())?)]
        }
        SumTo(a) => vec![(a.clone(), g.broadcast_to(a.shape())?)],
        BroadcastTo(a) => vec![(a.clone(), g.sum_to(a.shape())?)],
        Reshape(a) => vec![(a.clone(), g.reshape(a.shape())?)],
        MatMul(a, b, ta, tb) => {
            let ga = if *ta { b.matmul_t(g, *tb, true)? } else { g.matmul_t(b, false, !tb)? };
            let gb = if *tb { g.matmul_t(a, true, *ta)? } else { a.matmul_t(g, !ta, false)? };
            vec![(a.clone(), ga), (b.clone(), gb)]
        }
        Conv(x, w, geom) => {
            vec![(x.clone(), g.conv2d_transpose(w, geom)?), (w.clone(), x.conv2d_weight(g, geom)?)]
        }
        ConvT(y, w, geom) => {
            vec![(y.clone(), g.conv2d(w, geom)?), (w.clone(), g.conv2d_weight(y, geom)?)]
        }
        ConvW(x, y, geom) => {
            vec![(x.clone(), y.conv2d_transpose(g, geom)?), (y.clone(), x.conv2d(g, geom)?)]
        }
    };
    Ok(out)
}

/// Gradients of the scalar `output` with respect to each of `inputs`.
///
/// With `create_graph` the returned gradients are themselves part of the graph
/// and can be differentiated again; otherwise they are constants. Inputs the
/// output does not depend on get zero gradients.
pub fn grad(output: &Var, inputs: &[&Var], create_graph: bool) -> Result<Vec<Var>> {
    if output.value().len() != 1 {
        return Err(AutogradError::NonScalarOutput(output.shape().to_vec()));
    }
    let _guard = (!create_graph).then(NoGradGuard::new);

    let targets: HashSet<u64> = inputs.iter().map(|v| v.0.id).collect();
    // Nodes on some path from an input to the output, keyed by id.
    let mut relevant: HashMap<u64, bool> = HashMap::new();
    let mut nodes: HashMap<u64, Var> = HashMap::new();
    let mut stack = vec![(output.clone(), false)];
    while let Some((v, expanded)) = stack.pop() {
        let id = v.0.id;
        if expanded {
            let hit = targets.contains(&id) || v.0.op.parents().iter().any(|p| relevant.get(&p.0.id) == Some(&true));
            relevant.insert(id, hit);
            if hit {
                nodes.insert(id, v);
            }
            continue;
        }
        if relevant.contains_key(&id) || !v.requires_grad() {
            relevant.entry(id).or_insert(targets.contains(&id));
            if targets.contains(&id) {
                nodes.insert(id, v);
            }
            continue;
        }
        let parents: Vec<Var> = v.0.op.parents().into_iter().cloned().collect();
        stack.push((v, true));
        for p in parents {
            if !relevant.contains_key(&p.0.id) {
                stack.push((p, false));
            }
        }
    }

    let mut order: Vec<u64> = nodes.keys().copied().collect();
    order.sort_unstable_by(|a, b| b.cmp(a));

    let mut grads: HashMap<u64, Var> = HashMap::new();
    grads.insert(output.0.id, Var::constant(Tensor::ones(output.shape())));
    for id in order {
        let Some(g) = grads.get(&id).cloned() else { continue };
        let node = &nodes[&id].0;
        if targets.contains(&id) && matches!(node.op, Op::Leaf) {
            continue;
        }
        for (parent, contribution) in backward_rule(node, &g)? {
            if relevant.get(&parent.0.id) != Some(&true) {
                continue;
            }
            let entry = grads.remove(&parent.0.id);
            let acc = match entry {
                Some(prev) => prev.add(&contribution)?,
                None => contribution,
            };
            grads.insert(parent.0.id, acc);
        }
    }

    Ok(inputs
        .iter()
        .map(|v| grads.get(&v.0.id).cloned().unwrap_or_else(|| Var::constant(Tensor::zeros(v.shape()))))
        .collect())
}
