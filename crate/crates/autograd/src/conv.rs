//! im2col-based 2-D convolution kernels on NCHW tensors.
//!
//! The three kernels are the forward convolution, its adjoint with respect to
//! the input (a transposed convolution) and its adjoint with respect to the
//! weight. Each one's derivatives are expressible through the other two, which
//! is what lets the graph differentiate through a gradient.

use crate::error::{AutogradError, Result};
use crate::tensor::{matmul, Tensor};

/// Geometry of a convolution `x[N, c_in, h_in, w_in] -> y[N, c_out, h_out, w_out]`
/// with weight `[c_out, c_in, kh, kw]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub c_in: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
    pub h_out: usize,
    pub w_out: usize,
}

fn conv_out(len: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    let padded = len + 2 * p;
    if padded < k || s == 0 {
        return None;
    }
    Some((padded - k) / s + 1)
}

impl ConvGeom {
    /// Geometry of a forward convolution over an input of spatial size `(h_in, w_in)`.
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        c_in: usize,
        h_in: usize,
        w_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Self> {
        let h_out = conv_out(h_in, kernel.0, stride.0, padding.0);
        let w_out = conv_out(w_in, kernel.1, stride.1, padding.1);
        match (h_out, w_out) {
            (Some(h_out), Some(w_out)) if h_out > 0 && w_out > 0 => Ok(Self {
                c_in,
                h_in,
                w_in,
                c_out,
                kh: kernel.0,
                kw: kernel.1,
                sh: stride.0,
                sw: stride.1,
                ph: padding.0,
                pw: padding.1,
                h_out,
                w_out,
            }),
            _ => Err(AutogradError::ShapeMismatch(format!(
                "kernel {:?} stride {:?} padding {:?} does not fit input {}x{}",
                kernel, stride, padding, h_in, w_in
            ))),
        }
    }

    /// Geometry of a transposed convolution taking `[N, c_in_t, h, w]` to
    /// `[N, c_out_t, (h-1)s - 2p + k, (w-1)s - 2p + k]`. The returned geometry
    /// describes the forward convolution it is the adjoint of, so its
    /// `c_out/h_out/w_out` are the transposed layer's input dimensions.
    #[allow(clippy::too_many_arguments)]
    pub fn transposed(
        c_in_t: usize,
        h: usize,
        w: usize,
        c_out_t: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Self> {
        let up = |len: usize, k: usize, s: usize, p: usize| -> Option<usize> {
            ((len.checked_sub(1)? * s) + k).checked_sub(2 * p).filter(|&v| v > 0)
        };
        let (Some(h_big), Some(w_big)) = (up(h, kernel.0, stride.0, padding.0), up(w, kernel.1, stride.1, padding.1))
        else {
            return Err(AutogradError::ShapeMismatch(format!(
                "transposed kernel {:?} stride {:?} padding {:?} does not fit input {}x{}",
                kernel, stride, padding, h, w
            )));
        };
        let g = Self::forward(c_out_t, h_big, w_big, c_in_t, kernel, stride, padding)?;
        debug_assert_eq!((g.h_out, g.w_out), (h, w));
        Ok(g)
    }

    fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.h_out * self.w_out
    }

    pub fn input_shape(&self, n: usize) -> [usize; 4] {
        [n, self.c_in, self.h_in, self.w_in]
    }

    pub fn output_shape(&self, n: usize) -> [usize; 4] {
        [n, self.c_out, self.h_out, self.w_out]
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.c_out, self.c_in, self.kh, self.kw]
    }
}

fn batch_of(t: &Tensor, expect: [usize; 4], what: &str) -> Result<usize> {
    let s = t.shape();
    if s.len() != 4 || s[1..] != expect[1..] {
        return Err(AutogradError::ShapeMismatch(format!(
            "{what}: expected [N, {}, {}, {}], got {:?}",
            expect[1], expect[2], expect[3], s
        )));
    }
    Ok(s[0])
}

fn check_weight(w: &Tensor, g: &ConvGeom) -> Result<()> {
    if w.shape() != g.weight_shape() {
        return Err(AutogradError::ShapeMismatch(format!(
            "conv weight: expected {:?}, got {:?}",
            g.weight_shape(),
            w.shape()
        )));
    }
    Ok(())
}

/// Unfolds `x` into a `[c_in*kh*kw, N*h_out*w_out]` patch matrix.
fn im2col(x: &[f32], n: usize, g: &ConvGeom) -> Vec<f32> {
    let p = g.p();
    let np = n * p;
    let mut cols = vec![0.0f32; g.k() * np];
    let plane = g.h_in * g.w_in;
    for ci in 0..g.c_in {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst_row = &mut cols[row * np..(row + 1) * np];
                for b in 0..n {
                    let src = &x[(b * g.c_in + ci) * plane..(b * g.c_in + ci + 1) * plane];
                    for oh in 0..g.h_out {
                        let ih = (oh * g.sh + ki) as isize - g.ph as isize;
                        if ih < 0 || ih >= g.h_in as isize {
                            continue;
                        }
                        let src_row = &src[ih as usize * g.w_in..(ih as usize + 1) * g.w_in];
                        let dst = &mut dst_row[b * p + oh * g.w_out..b * p + (oh + 1) * g.w_out];
                        for (ow, d) in dst.iter_mut().enumerate() {
                            let iw = (ow * g.sw + kj) as isize - g.pw as isize;
                            if iw >= 0 && iw < g.w_in as isize {
                                *d = src_row[iw as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters-adds a patch matrix back onto an input-shaped buffer.
fn col2im(cols: &[f32], n: usize, g: &ConvGeom) -> Vec<f32> {
    let p = g.p();
    let np = n * p;
    let plane = g.h_in * g.w_in;
    let mut x = vec![0.0f32; n * g.c_in * plane];
    for ci in 0..g.c_in {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src_row = &cols[row * np..(row + 1) * np];
                for b in 0..n {
                    let dst = &mut x[(b * g.c_in + ci) * plane..(b * g.c_in + ci + 1) * plane];
                    for oh in 0..g.h_out {
                        let ih = (oh * g.sh + ki) as isize - g.ph as isize;
                        if ih < 0 || ih >= g.h_in as isize {
                            continue;
                        }
                        let dst_row = &mut dst[ih as usize * g.w_in..(ih as usize + 1) * g.w_in];
                        let src = &src_row[b * p + oh * g.w_out..b * p + (oh + 1) * g.w_out];
                        for (ow, &v) in src.iter().enumerate() {
                            let iw = (ow * g.sw + kj) as isize - g.pw as isize;
                            if iw >= 0 && iw < g.w_in as isize {
                                dst_row[iw as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// `[N, C, P]` -> `[C, N*P]`
fn nc_to_cn(data: &[f32], n: usize, c: usize, p: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; data.len()];
    for b in 0..n {
        for ch in 0..c {
            let src = &data[(b * c + ch) * p..(b * c + ch + 1) * p];
            out[ch * n * p + b * p..ch * n * p + (b + 1) * p].copy_from_slice(src);
        }
    }
    out
}

/// `[C, N*P]` -> `[N, C, P]`
fn cn_to_nc(data: &[f32], n: usize, c: usize, p: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; data.len()];
    for ch in 0..c {
        for b in 0..n {
            let src = &data[ch * n * p + b * p..ch * n * p + (b + 1) * p];
            out[(b * c + ch) * p..(b * c + ch + 1) * p].copy_from_slice(src);
        }
    }
    out
}

fn weight_matrix(w: &Tensor, g: &ConvGeom) -> Tensor {
    w.reshape(&[g.c_out, g.k()]).expect("weight shape checked")
}

/// Forward convolution.
pub fn conv2d(x: &Tensor, w: &Tensor, g: &ConvGeom) -> Result<Tensor> {
    let n = batch_of(x, g.input_shape(0), "conv2d input")?;
    check_weight(w, g)?;
    let cols = Tensor::new(&[g.k(), n * g.p()], im2col(x.data(), n, g))?;
    let out = matmul(&weight_matrix(w, g), &cols, false, false)?;
    Tensor::new(&g.output_shape(n), cn_to_nc(out.data(), n, g.c_out, g.p()))
}

/// Adjoint of [`conv2d`] in its input: maps an output-shaped tensor to an input-shaped one.
pub fn conv2d_transpose(y: &Tensor, w: &Tensor, g: &ConvGeom) -> Result<Tensor> {
    let n = batch_of(y, g.output_shape(0), "transposed conv input")?;
    check_weight(w, g)?;
    let y_mat = Tensor::new(&[g.c_out, n * g.p()], nc_to_cn(y.data(), n, g.c_out, g.p()))?;
    let cols = matmul(&weight_matrix(w, g), &y_mat, true, false)?;
    Tensor::new(&g.input_shape(n), col2im(cols.data(), n, g))
}

/// Adjoint of [`conv2d`] in its weight: the weight gradient given input `x` and output gradient `y`.
pub fn conv2d_weight(x: &Tensor, y: &Tensor, g: &ConvGeom) -> Result<Tensor> {
    let n = batch_of(x, g.input_shape(0), "conv weight-grad input")?;
    let ny = batch_of(y, g.output_shape(0), "conv weight-grad output")?;
    if n != ny {
        return Err(AutogradError::ShapeMismatch(format!("batch sizes differ: {n} vs {ny}")));
    }
    let cols = Tensor::new(&[g.k(), n * g.p()], im2col(x.data(), n, g))?;
    let y_mat = Tensor::new(&[g.c_out, n * g.p()], nc_to_cn(y.data(), n, g.c_out, g.p()))?;
    let gw = matmul(&y_mat, &cols, false, true)?;
    gw.reshape(&g.weight_shape())
}
