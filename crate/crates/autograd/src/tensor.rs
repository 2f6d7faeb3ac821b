//! Dense row-major `f32` tensors and the value-level kernels the graph ops use.

use rand::Rng;

use crate::error::{AutogradError, Result};

/// A dense, row-major `f32` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(AutogradError::ShapeMismatch(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                numel(shape),
                data.len()
            )));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; numel(shape)] }
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        Self { shape: shape.to_vec(), data: vec![value; numel(shape)] }
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn scalar(value: f32) -> Self {
        Self { shape: vec![], data: vec![value] }
    }

    /// Entries drawn i.i.d. from `U[lo, hi)`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], lo: f32, hi: f32, rng: &mut R) -> Self {
        let data = (0..numel(shape)).map(|_| rng.random_range(lo..hi)).collect();
        Self { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f32 {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f32, f32) -> f32) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self { shape: self.shape.clone(), data }
    }

    pub fn sum(&self) -> f32 {
        self.data.iter().sum()
    }

    /// Rows `[start, end)` along the leading axis.
    pub fn slice_outer(&self, start: usize, end: usize) -> Self {
        let inner: usize = self.shape[1..].iter().product();
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Self { shape, data: self.data[start * inner..end * inner].to_vec() }
    }

    /// Stacks equally-shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor]) -> Result<Self> {
        let first = items.first().ok_or_else(|| AutogradError::ShapeMismatch("stack of zero tensors".into()))?;
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            if t.shape != first.shape {
                return Err(AutogradError::ShapeMismatch(format!("stack: {:?} vs {:?}", t.shape, first.shape)));
            }
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Self { shape, data })
    }
}

/// Row-major strides for `shape`.
fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

pub(crate) fn check_broadcastable(src: &[usize], dst: &[usize]) -> Result<()> {
    if src.len() != dst.len() || src.iter().zip(dst).any(|(&s, &d)| s != d && s != 1) {
        return Err(AutogradError::ShapeMismatch(format!("cannot broadcast {:?} to {:?}", src, dst)));
    }
    Ok(())
}

/// For every element of `dst`, the flat index of the `src` element it reads from.
fn broadcast_index_map(src: &[usize], dst: &[usize]) -> Vec<usize> {
    let src_strides = strides(src);
    let eff: Vec<usize> = src.iter().zip(&src_strides).map(|(&n, &s)| if n == 1 { 0 } else { s }).collect();
    let total = numel(dst);
    let mut out = Vec::with_capacity(total);
    let mut counter = vec![0usize; dst.len()];
    let mut offset = 0usize;
    for _ in 0..total {
        out.push(offset);
        for axis in (0..dst.len()).rev() {
            counter[axis] += 1;
            offset += eff[axis];
            if counter[axis] < dst[axis] {
                break;
            }
            offset -= eff[axis] * counter[axis];
            counter[axis] = 0;
        }
    }
    out
}

pub(crate) fn broadcast_to(t: &Tensor, shape: &[usize]) -> Tensor {
    if t.shape == shape {
        return t.clone();
    }
    let map = broadcast_index_map(&t.shape, shape);
    Tensor { shape: shape.to_vec(), data: map.into_iter().map(|i| t.data[i]).collect() }
}

pub(crate) fn sum_to(t: &Tensor, shape: &[usize]) -> Tensor {
    if t.shape == shape {
        return t.clone();
    }
    let map = broadcast_index_map(shape, &t.shape);
    let mut data = vec![0.0f32; numel(shape)];
    for (v, i) in t.data.iter().zip(map) {
        data[i] += v;
    }
    Tensor { shape: shape.to_vec(), data }
}

/// `op(a) @ op(b)` for 2-D tensors, where `op` optionally transposes.
pub(crate) fn matmul(a: &Tensor, b: &Tensor, ta: bool, tb: bool) -> Result<Tensor> {
    if a.shape.len() != 2 || b.shape.len() != 2 {
        return Err(AutogradError::ShapeMismatch(format!(
            "matmul needs 2-D operands, got {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    let (ar, ac) = (a.shape[0], a.shape[1]);
    let (br, bc) = (b.shape[0], b.shape[1]);
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if tb { (bc, br) } else { (br, bc) };
    if k != k2 {
        return Err(AutogradError::ShapeMismatch(format!(
            "matmul inner dims differ: {:?}{} x {:?}{}",
            a.shape,
            if ta { "ᵀ" } else { "" },
            b.shape,
            if tb { "ᵀ" } else { "" }
        )));
    }
    let mut out = vec![0.0f32; m * n];
    let (rsa, csa) = if ta { (1, ac as isize) } else { (ac as isize, 1) };
    let (rsb, csb) = if tb { (1, bc as isize) } else { (bc as isize, 1) };
    if m > 0 && n > 0 && k > 0 {
        // SAFETY: strides describe in-bounds views of `a`, `b` and `out` for the
        // (m, k) x (k, n) product computed above.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr(),
                rsb,
                csb,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    Ok(Tensor { shape: vec![m, n], data: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_then_sum_is_scaled_identity() {
        let t = Tensor::new(&[1, 3, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let b = broadcast_to(&t, &[2, 3, 4]);
        assert_eq!(b.shape(), &[2, 3, 4]);
        assert_eq!(&b.data()[0..4], &[1.0; 4]);
        assert_eq!(&b.data()[4..8], &[2.0; 4]);
        let s = sum_to(&b, &[1, 3, 1]);
        assert_eq!(s.data(), &[8.0, 16.0, 24.0]);
    }

    #[test]
    fn matmul_with_transposes() {
        let a = Tensor::new(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::new(&[3, 2], vec![1., 0., 0., 1., 1., 1.]).unwrap();
        let c = matmul(&a, &b, false, false).unwrap();
        assert_eq!(c.data(), &[4., 5., 10., 11.]);
        // aᵀ (3x2) @ a (2x3)
        let g = matmul(&a, &a, true, false).unwrap();
        assert_eq!(g.shape(), &[3, 3]);
        assert_eq!(g.data()[0], 17.0);
        let h = matmul(&a, &a, false, true).unwrap();
        assert_eq!(h.data(), &[14., 32., 32., 77.]);
        assert!(matmul(&a, &a, false, false).is_err());
    }

    #[test]
    fn new_rejects_wrong_length() {
        assert!(Tensor::new(&[2, 2], vec![0.0; 3]).is_err());
    }
}
