//! Declarative layer-by-layer architectures with shape arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

pub const LATENT_DIM: usize = 100;
pub const LEAKY_SLOPE: f32 = 0.2;

/// Padding used wherever a layer is listed with "padding".
const SAME_PAD: (usize, usize) = (1, 1);
const NO_PAD: (usize, usize) = (0, 0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Generator,
    Critic,
    Encoder,
    Cae,
}

impl FromStr for Role {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "generator" => Ok(Role::Generator),
            "critic" | "discriminator" => Ok(Role::Critic),
            "encoder" => Ok(Role::Encoder),
            "cae" | "autoencoder" => Ok(Role::Cae),
            other => Err(ModelError::UnsupportedRole(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Conv2d,
    Tconv2d,
    Batchnorm,
    LeakyRelu,
    Reshape,
    Linear,
    Tanh,
}

/// One layer. Shapes are per sample (no batch axis).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Output channels for (transposed) convolutions, output width for linear layers.
    pub filters: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub alpha: f32,
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub role: Role,
    pub frame_width: usize,
    pub channel_divisor: usize,
    pub layers: Vec<LayerSpec>,
    pub latent_dim: usize,
    /// Index of the layer whose output is the critic feature vector `f(x)`.
    pub feature_layer: Option<usize>,
}

impl NetworkSpec {
    pub fn input_shape(&self) -> &[usize] {
        &self.layers[0].in_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.layers.last().expect("non-empty").out_shape
    }

    pub fn feature_width(&self) -> Option<usize> {
        self.feature_layer.map(|i| self.layers[i].out_shape.iter().product())
    }
}

/// Build options beyond the role: frame width and a channel divisor that
/// shrinks every hidden filter count (1 reproduces the reference tables).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchOptions {
    pub frame_width: usize,
    pub channel_divisor: usize,
}

impl Default for ArchOptions {
    fn default() -> Self {
        Self { frame_width: 128, channel_divisor: 1 }
    }
}

fn conv_len(len: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    let padded = len + 2 * p;
    (padded >= k && s > 0).then(|| (padded - k) / s + 1).filter(|&v| v > 0)
}

fn tconv_len(len: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    ((len.checked_sub(1)? * s) + k).checked_sub(2 * p).filter(|&v| v > 0)
}

/// Output shape of `layer` applied to a per-sample input of shape `input`.
pub(crate) fn layer_output(layer: &LayerSpec, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
    let target = &layer.out_shape;
    match layer.kind {
        LayerKind::Conv2d | LayerKind::Tconv2d => {
            let [c, h, w] = input else { return Err(format!("expected (C, H, W), got {input:?}")) };
            if *c != layer.in_shape[0] {
                return Err(format!("expected {} channels, got {c}", layer.in_shape[0]));
            }
            let f = if layer.kind == LayerKind::Conv2d { conv_len } else { tconv_len };
            let h = f(*h, layer.kernel.0, layer.stride.0, layer.padding.0);
            let w = f(*w, layer.kernel.1, layer.stride.1, layer.padding.1);
            match (h, w) {
                (Some(h), Some(w)) => Ok(vec![layer.filters, h, w]),
                _ => Err(format!("kernel {:?} cannot cover input {input:?}", layer.kernel)),
            }
        }
        LayerKind::Batchnorm => {
            if input.first() != layer.in_shape.first() {
                return Err(format!("expected {} channels, got {input:?}", layer.in_shape[0]));
            }
            Ok(input.to_vec())
        }
        LayerKind::LeakyRelu | LayerKind::Tanh => Ok(input.to_vec()),
        LayerKind::Reshape => {
            let n_in: usize = input.iter().product();
            let n_out: usize = target.iter().product();
            if n_in != n_out {
                return Err(format!("cannot reshape {input:?} ({n_in}) to {target:?} ({n_out})"));
            }
            Ok(target.clone())
        }
        LayerKind::Linear => {
            if input != layer.in_shape.as_slice() {
                return Err(format!("expected {:?}, got {input:?}", layer.in_shape));
            }
            Ok(vec![layer.filters])
        }
    }
}

/// Incrementally assembles a layer list, tracking the running shape.
struct Builder {
    shape: Vec<usize>,
    layers: Vec<LayerSpec>,
}

impl Builder {
    fn new(input: Vec<usize>) -> Self {
        Self { shape: input, layers: Vec::new() }
    }

    fn push(
        &mut self,
        kind: LayerKind,
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        out_hint: Vec<usize>,
    ) -> Result<()> {
        let mut layer = LayerSpec {
            kind,
            filters,
            kernel,
            stride,
            padding,
            alpha: if kind == LayerKind::LeakyRelu { LEAKY_SLOPE } else { 0.0 },
            in_shape: self.shape.clone(),
            out_shape: out_hint,
        };
        let out = layer_output(&layer, &self.shape)
            .map_err(|reason| ModelError::ShapeMismatch { layer: self.layers.len(), reason })?;
        layer.out_shape = out.clone();
        self.layers.push(layer);
        self.shape = out;
        Ok(())
    }

    fn conv(
        &mut self,
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<()> {
        self.push(LayerKind::Conv2d, filters, kernel, stride, padding, vec![])
    }

    fn tconv(
        &mut self,
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<()> {
        self.push(LayerKind::Tconv2d, filters, kernel, stride, padding, vec![])
    }

    fn bn(&mut self) -> Result<()> {
        self.push(LayerKind::Batchnorm, 0, (0, 0), (0, 0), NO_PAD, vec![])
    }

    fn lrelu(&mut self) -> Result<()> {
        self.push(LayerKind::LeakyRelu, 0, (0, 0), (0, 0), NO_PAD, vec![])
    }

    fn reshape(&mut self, to: Vec<usize>) -> Result<()> {
        self.push(LayerKind::Reshape, 0, (0, 0), (0, 0), NO_PAD, to)
    }

    fn linear(&mut self, out: usize) -> Result<()> {
        self.push(LayerKind::Linear, out, (0, 0), (0, 0), NO_PAD, vec![])
    }

    fn tanh(&mut self) -> Result<()> {
        self.push(LayerKind::Tanh, 0, (0, 0), (0, 0), NO_PAD, vec![])
    }

    fn flatten(&mut self) -> Result<()> {
        let n = self.shape.iter().product();
        self.reshape(vec![n])
    }
}

/// The strided convolution stack shared by the critic, encoder and CAE:
/// kernel (2,4), stride (2,2), padding; batch norm on all but the first block
/// and leaky ReLU after every block except the last.
fn conv_stack(b: &mut Builder, filters: &[usize]) -> Result<()> {
    let last = filters.len() - 1;
    for (i, &f) in filters.iter().enumerate() {
        b.conv(f, (2, 4), (2, 2), SAME_PAD)?;
        if i == last {
            break;
        }
        if i > 0 {
            b.bn()?;
        }
        b.lrelu()?;
    }
    Ok(())
}

/// Builds the reference architecture for `role` at frame width `frame_width`.
pub fn build_network(role: Role, frame_width: usize) -> Result<NetworkSpec> {
    build_network_with(role, ArchOptions { frame_width, channel_divisor: 1 })
}

/// Builds `role` with explicit [`ArchOptions`].
pub fn build_network_with(role: Role, opts: ArchOptions) -> Result<NetworkSpec> {
    let w = opts.frame_width;
    let d = opts.channel_divisor.max(1);
    let ch = |c: usize| (c / d).max(1);
    let unsupported = |need: usize| ModelError::UnsupportedWidth { role, width: w, multiple: need };

    let (layers, feature_layer) = match role {
        Role::Generator => {
            if !w.is_multiple_of(32) || w == 0 {
                return Err(unsupported(32));
            }
            let mut b = Builder::new(vec![LATENT_DIM]);
            b.reshape(vec![LATENT_DIM, 1, 1])?;
            // The first block sets the seed width; five doublings follow.
            b.tconv(ch(1024), (2, w / 32), (1, 1), NO_PAD)?;
            b.bn()?;
            b.lrelu()?;
            for f in [512, 256, 128, 64] {
                b.tconv(ch(f), (2, 4), (2, 2), SAME_PAD)?;
                b.bn()?;
                b.lrelu()?;
            }
            b.tconv(1, (2, 4), (2, 2), SAME_PAD)?;
            (b.layers, None)
        }
        Role::Critic => {
            if !w.is_multiple_of(32) || w == 0 {
                return Err(unsupported(32));
            }
            let mut b = Builder::new(vec![1, 2, w]);
            conv_stack(&mut b, &[ch(64), ch(128), ch(256), ch(512), ch(1024)])?;
            b.flatten()?;
            let feature = b.layers.len() - 1;
            b.linear(1)?;
            (b.layers, Some(feature))
        }
        Role::Encoder => {
            if !w.is_multiple_of(64) || w == 0 {
                return Err(unsupported(64));
            }
            let mut b = Builder::new(vec![1, 2, w]);
            conv_stack(&mut b, &[ch(64), ch(64), ch(128), ch(256), ch(512), ch(1024)])?;
            b.flatten()?;
            b.linear(LATENT_DIM)?;
            b.tanh()?;
            (b.layers, None)
        }
        Role::Cae => {
            if !w.is_multiple_of(64) || w == 0 {
                return Err(unsupported(64));
            }
            let mut b = Builder::new(vec![1, 2, w]);
            conv_stack(&mut b, &[ch(64), ch(64), ch(128), ch(256), ch(512), ch(1024)])?;
            let feature_map = b.shape.clone();
            b.flatten()?;
            b.linear(LATENT_DIM)?;
            let bottleneck = b.layers.len() - 1;
            b.linear(feature_map.iter().product())?;
            b.reshape(feature_map)?;
            let decoder = [ch(512), ch(256), ch(128), ch(64), ch(64)];
            for (i, &f) in decoder.iter().enumerate() {
                b.tconv(f, (1, 2), (1, 2), NO_PAD)?;
                b.lrelu()?;
                if i + 1 < decoder.len() {
                    b.bn()?;
                }
            }
            b.tconv(1, (1, 2), (1, 2), NO_PAD)?;
            (b.layers, Some(bottleneck))
        }
    };
    Ok(NetworkSpec { role, frame_width: w, channel_divisor: d, layers, latent_dim: LATENT_DIM, feature_layer })
}

/// Per-layer output shapes (batch axis included) for an input of `input_shape`.
pub fn infer_shapes(spec: &NetworkSpec, input_shape: &[usize]) -> Result<Vec<Vec<usize>>> {
    let Some((&batch, mut shape)) = input_shape.split_first().map(|(b, s)| (b, s.to_vec())) else {
        return Err(ModelError::ShapeMismatch { layer: 0, reason: "empty input shape".into() });
    };
    let mut out = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        shape = layer_output(layer, &shape).map_err(|reason| ModelError::ShapeMismatch { layer: i, reason })?;
        if layer.kind != LayerKind::Reshape && layer.kind != LayerKind::Linear && shape != layer.out_shape {
            return Err(ModelError::ShapeMismatch {
                layer: i,
                reason: format!("produces {shape:?}, layer expects {:?}", layer.out_shape),
            });
        }
        let mut full = vec![batch];
        full.extend_from_slice(&shape);
        out.push(full);
    }
    Ok(out)
}

fn fmt_shape(s: &[usize]) -> String {
    let inner: Vec<String> = s.iter().map(|d| d.to_string()).collect();
    format!("(N,{})", inner.join(","))
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pad = if self.padding == NO_PAD { "no padding".to_string() } else { format!("padding {:?}", self.padding) };
        let filters = |n: usize| if n == 1 { "1 filter".to_string() } else { format!("{n} filters") };
        match self.kind {
            LayerKind::Conv2d => write!(
                f,
                "2D convolution layer | {}, kernel size of {:?}, stride of {:?}, {}",
                filters(self.filters),
                self.kernel,
                self.stride,
                pad
            ),
            LayerKind::Tconv2d => write!(
                f,
                "2D transposed convolution layer | {}, kernel size of {:?}, stride of {:?}, {}",
                filters(self.filters),
                self.kernel,
                self.stride,
                pad
            ),
            LayerKind::Batchnorm => write!(f, "Batch normalization |"),
            LayerKind::LeakyRelu => write!(f, "Leaky-ReLU | alpha={}", self.alpha),
            LayerKind::Reshape => {
                write!(f, "Reshape layer | {} to {}", fmt_shape(&self.in_shape), fmt_shape(&self.out_shape))
            }
            LayerKind::Linear => write!(
                f,
                "Linear layer | {} neurons to {} neuron{}",
                self.in_shape[0],
                self.filters,
                if self.filters == 1 { "" } else { "s" }
            ),
            LayerKind::Tanh => write!(f, "Tanh |"),
        }?;
        write!(f, " -> {}", fmt_shape(&self.out_shape))
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {:?} W={} divisor={}", self.role, self.frame_width, self.channel_divisor)?;
        for l in &self.layers {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}
