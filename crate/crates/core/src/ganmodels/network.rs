//! Parameterised networks built from a [`NetworkSpec`].

use rand::{Rng, SeedableRng};
use rfanogan_autograd::{ConvGeom, Tensor, Var};
use sha2::{Digest, Sha256};

use super::params::{decode_params, encode_params, StateDict};
use super::spec::{LayerKind, NetworkSpec};
use super::{ModelError, Result};
use crate::rfdata::IqFrame;

const BN_EPS: f32 = 1e-5;
const BN_MOMENTUM: f32 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; running statistics are updated.
    Train,
    /// Running statistics in batch norm.
    Eval,
}

#[derive(Clone, Debug)]
enum Layer {
    Conv { geom: ConvGeom, weight: usize, bias: usize },
    Tconv { geom: ConvGeom, weight: usize, bias: usize },
    BatchNorm { gamma: usize, beta: usize, stats: usize, channels: usize },
    LeakyRelu(f32),
    Reshape(Vec<usize>),
    Linear { weight: usize, bias: usize },
    Tanh,
}

/// Result of a forward pass.
pub struct Forward {
    pub output: Var,
    /// Output of the feature layer named in the `NetworkSpec`, if it has one.
    pub features: Option<Var>,
}

/// Batch-norm statistics observed during a training-mode pass.
struct StatUpdate {
    index: usize,
    mean: Vec<f32>,
    var_unbiased: Vec<f32>,
}

/// Stacks frames into a `[N, 1, 2, W]` batch.
pub fn frames_to_batch(frames: &[&IqFrame]) -> Result<Tensor> {
    let w = frames.first().ok_or(ModelError::EmptyBatch)?.width();
    let mut data = Vec::with_capacity(frames.len() * 2 * w);
    for f in frames {
        if f.width() != w {
            return Err(ModelError::BatchMismatch(vec![1, 2, w], vec![1, 2, f.width()]));
        }
        data.extend_from_slice(f.samples());
    }
    Ok(Tensor::new(&[frames.len(), 1, 2, w], data)?)
}

/// Anything the trainers and scorers can run and differentiate through.
pub trait Model {
    fn forward(&mut self, x: &Var, mode: Mode) -> Result<Forward>;
    fn forward_eval(&self, x: &Var) -> Result<Forward>;
    fn params(&self) -> &[Var];
    /// Replaces parameter values, same order and shapes as [`Model::params`].
    fn set_param_tensors(&mut self, values: Vec<Tensor>) -> Result<()>;
    fn param_hash(&self) -> String;
    /// Per-sample input shape.
    fn input_shape(&self) -> Vec<usize>;

    fn param_refs(&self) -> Vec<&Var> {
        self.params().iter().collect()
    }

    fn param_tensors(&self) -> Vec<Tensor> {
        self.params().iter().map(|p| p.value().clone()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    names: Vec<String>,
    params: Vec<Var>,
    /// Batch-norm running `(mean, var)` per batch-norm layer.
    running: Vec<(Tensor, Tensor)>,
    trainable: bool,
}

impl Network {
    /// Instantiates `spec` with freshly initialised parameters.
    ///
    /// Weights and biases follow the uniform fan-in rule `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`;
    /// batch-norm scales start at 1 and shifts at 0.
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut names = Vec::new();
        let mut values: Vec<Tensor> = Vec::new();
        let mut running = Vec::new();
        let mut add = |names: &mut Vec<String>, name: String, t: Tensor| {
            names.push(name);
            values.push(t);
            values.len() - 1
        };
        for (i, l) in spec.layers.iter().enumerate() {
            let layer = match l.kind {
                LayerKind::Conv2d => {
                    let geom = ConvGeom::forward(
                        l.in_shape[0],
                        l.in_shape[1],
                        l.in_shape[2],
                        l.filters,
                        l.kernel,
                        l.stride,
                        l.padding,
                    )?;
                    let fan_in = (geom.c_in * geom.kh * geom.kw) as f32;
                    let b = 1.0 / fan_in.sqrt();
                    let weight =
                        add(&mut names, format!("{i}.weight"), Tensor::uniform(&geom.weight_shape(), -b, b, rng));
                    let bias = add(&mut names, format!("{i}.bias"), Tensor::uniform(&[1, l.filters, 1, 1], -b, b, rng));
                    Layer::Conv { geom, weight, bias }
                }
                LayerKind::Tconv2d => {
                    let geom = ConvGeom::transposed(
                        l.in_shape[0],
                        l.in_shape[1],
                        l.in_shape[2],
                        l.filters,
                        l.kernel,
                        l.stride,
                        l.padding,
                    )?;
                    // weight is [c_in_t, c_out_t, kh, kw]; fan-in counted over its second axis
                    let fan_in = (geom.c_in * geom.kh * geom.kw) as f32;
                    let b = 1.0 / fan_in.sqrt();
                    let weight =
                        add(&mut names, format!("{i}.weight"), Tensor::uniform(&geom.weight_shape(), -b, b, rng));
                    let bias = add(&mut names, format!("{i}.bias"), Tensor::uniform(&[1, l.filters, 1, 1], -b, b, rng));
                    Layer::Tconv { geom, weight, bias }
                }
                LayerKind::Batchnorm => {
                    let channels = l.in_shape[0];
                    let mut stat = vec![1usize; l.in_shape.len() + 1];
                    stat[1] = channels;
                    let gamma = add(&mut names, format!("{i}.gamma"), Tensor::ones(&stat));
                    let beta = add(&mut names, format!("{i}.beta"), Tensor::zeros(&stat));
                    running.push((Tensor::zeros(&[channels]), Tensor::ones(&[channels])));
                    Layer::BatchNorm { gamma, beta, stats: running.len() - 1, channels }
                }
                LayerKind::LeakyRelu => Layer::LeakyRelu(l.alpha),
                LayerKind::Reshape => Layer::Reshape(l.out_shape.clone()),
                LayerKind::Linear => {
                    let fan_in = l.in_shape[0];
                    let b = 1.0 / (fan_in as f32).sqrt();
                    let weight =
                        add(&mut names, format!("{i}.weight"), Tensor::uniform(&[l.filters, fan_in], -b, b, rng));
                    let bias = add(&mut names, format!("{i}.bias"), Tensor::uniform(&[1, l.filters], -b, b, rng));
                    Layer::Linear { weight, bias }
                }
                LayerKind::Tanh => Layer::Tanh,
            };
            layers.push(layer);
        }
        let params = values.into_iter().map(Var::param).collect();
        Ok(Self { spec, layers, names, params, running, trainable: true })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value().len()).sum()
    }

    fn replace_params(&mut self, values: Vec<Tensor>) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(ModelError::State(format!("{} tensors for {} params", values.len(), self.params.len())));
        }
        for (p, v) in self.params.iter().zip(&values) {
            if p.shape() != v.shape() {
                return Err(ModelError::State(format!("shape {:?} for param of shape {:?}", v.shape(), p.shape())));
            }
        }
        let trainable = self.trainable;
        self.params = values.into_iter().map(|v| if trainable { Var::param(v) } else { Var::constant(v) }).collect();
        Ok(())
    }

    /// Whether gradients flow to this network's parameters.
    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
        let values = self.param_tensors();
        self.replace_params(values).expect("same shapes");
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    fn forward_updating(&mut self, x: &Var, mode: Mode) -> Result<Forward> {
        let (out, updates) = self.run(x, mode)?;
        for u in updates {
            let (mean, var) = &mut self.running[u.index];
            for (m, &b) in mean.data_mut().iter_mut().zip(&u.mean) {
                *m = (1.0 - BN_MOMENTUM) * *m + BN_MOMENTUM * b;
            }
            for (v, &b) in var.data_mut().iter_mut().zip(&u.var_unbiased) {
                *v = (1.0 - BN_MOMENTUM) * *v + BN_MOMENTUM * b;
            }
        }
        Ok(out)
    }

    fn run(&self, x: &Var, mode: Mode) -> Result<(Forward, Vec<StatUpdate>)> {
        let expected = self.spec.input_shape();
        if x.shape().len() != expected.len() + 1 || &x.shape()[1..] != expected {
            return Err(ModelError::ShapeMismatch {
                layer: 0,
                reason: format!("input {:?} does not match (N, {:?})", x.shape(), expected),
            });
        }
        let n = x.shape()[0];
        let mut h = x.clone();
        let mut features = None;
        let mut updates = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            h = match layer {
                Layer::Conv { geom, weight, bias } => {
                    let y = h.conv2d(&self.params[*weight], geom)?;
                    let b = self.params[*bias].broadcast_to(y.shape())?;
                    y.add(&b)?
                }
                Layer::Tconv { geom, weight, bias } => {
                    let y = h.conv2d_transpose(&self.params[*weight], geom)?;
                    let b = self.params[*bias].broadcast_to(y.shape())?;
                    y.add(&b)?
                }
                Layer::BatchNorm { gamma, beta, stats, channels } => {
                    let shape = h.shape().to_vec();
                    let stat_shape = self.params[*gamma].shape().to_vec();
                    let (centered, inv_std) = match mode {
                        Mode::Train => {
                            let m = (shape.iter().product::<usize>() / channels) as f32;
                            let mean = h.sum_to(&stat_shape)?.scale(1.0 / m);
                            let centered = h.sub(&mean.broadcast_to(&shape)?)?;
                            let var = centered.square().sum_to(&stat_shape)?.scale(1.0 / m);
                            let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
                            updates.push(StatUpdate {
                                index: *stats,
                                mean: mean.value().data().to_vec(),
                                var_unbiased: var.value().data().iter().map(|v| v * unbias).collect(),
                            });
                            (centered, var.add_scalar(BN_EPS).rsqrt())
                        }
                        Mode::Eval => {
                            let (rm, rv) = &self.running[*stats];
                            let mean = Var::constant(rm.reshape(&stat_shape)?);
                            let inv = Var::constant(rv.reshape(&stat_shape)?.map(|v| 1.0 / (v + BN_EPS).sqrt()));
                            (h.sub(&mean.broadcast_to(&shape)?)?, inv)
                        }
                    };
                    let scale = inv_std.mul(&self.params[*gamma])?.broadcast_to(&shape)?;
                    centered.mul(&scale)?.add(&self.params[*beta].broadcast_to(&shape)?)?
                }
                Layer::LeakyRelu(alpha) => h.leaky_relu(*alpha),
                Layer::Reshape(to) => {
                    let mut s = vec![n];
                    s.extend_from_slice(to);
                    h.reshape(&s)?
                }
                Layer::Linear { weight, bias } => {
                    let y = h.matmul_t(&self.params[*weight], false, true)?;
                    let b = self.params[*bias].broadcast_to(y.shape())?;
                    y.add(&b)?
                }
                Layer::Tanh => h.tanh(),
            };
            if Some(i) == self.spec.feature_layer {
                features = Some(h.clone());
            }
        }
        Ok((Forward { output: h, features }, updates))
    }

    /// Parameters and batch-norm buffers by name.
    pub fn state_dict(&self) -> StateDict {
        let mut sd = StateDict::default();
        for (name, p) in self.names.iter().zip(&self.params) {
            sd.insert(name.clone(), p.value().clone());
        }
        let mut bn = 0;
        for (i, l) in self.layers.iter().enumerate() {
            if let Layer::BatchNorm { stats, .. } = l {
                let (m, v) = &self.running[*stats];
                sd.insert(format!("{i}.running_mean"), m.clone());
                sd.insert(format!("{i}.running_var"), v.clone());
                bn += 1;
            }
        }
        debug_assert_eq!(bn, self.running.len());
        sd
    }

    pub fn load_state_dict(&mut self, sd: &StateDict) -> Result<()> {
        let mut values = Vec::with_capacity(self.params.len());
        for name in &self.names {
            values.push(sd.get(name).ok_or_else(|| ModelError::State(format!("missing {name}")))?.clone());
        }
        let mut running = self.running.clone();
        for (i, l) in self.layers.iter().enumerate() {
            if let Layer::BatchNorm { stats, channels, .. } = l {
                for (suffix, slot) in [("running_mean", 0), ("running_var", 1)] {
                    let t = sd
                        .get(&format!("{i}.{suffix}"))
                        .ok_or_else(|| ModelError::State(format!("missing {i}.{suffix}")))?;
                    if t.shape() != [*channels] {
                        return Err(ModelError::State(format!("{i}.{suffix} has shape {:?}", t.shape())));
                    }
                    if slot == 0 {
                        running[*stats].0 = t.clone();
                    } else {
                        running[*stats].1 = t.clone();
                    }
                }
            }
        }
        self.replace_params(values)?;
        self.running = running;
        Ok(())
    }

    /// Parameters and buffers in the binary parameter-blob format.
    pub fn to_blob(&self) -> Vec<u8> {
        encode_params(&self.state_dict())
    }

    /// Network for `spec` with state restored from a blob written by [`Self::to_blob`].
    pub fn from_blob(spec: NetworkSpec, blob: &[u8]) -> Result<Self> {
        let sd = decode_params(blob)?;
        let mut net = Self::new(spec, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0))?;
        net.load_state_dict(&sd)?;
        Ok(net)
    }

    fn hash_state(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.state_dict().iter() {
            h.update(name.as_bytes());
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

impl Model for Network {
    /// Runs the network on a batch `[N, ..input_shape]`; a training-mode pass
    /// uses batch statistics and updates the running batch-norm statistics.
    fn forward(&mut self, x: &Var, mode: Mode) -> Result<Forward> {
        self.forward_updating(x, mode)
    }

    /// Inference pass with running batch-norm statistics; leaves the network unchanged.
    fn forward_eval(&self, x: &Var) -> Result<Forward> {
        Ok(self.run(x, Mode::Eval)?.0)
    }

    fn params(&self) -> &[Var] {
        &self.params
    }

    fn set_param_tensors(&mut self, values: Vec<Tensor>) -> Result<()> {
        self.replace_params(values)
    }

    /// SHA-256 over all parameters and batch-norm buffers.
    fn param_hash(&self) -> String {
        self.hash_state()
    }

    fn input_shape(&self) -> Vec<usize> {
        self.spec.input_shape().to_vec()
    }
}
