//! Dense K-mode tensors with unfolding, folding and mode products.
//!
//! Storage is mode-0-fastest: the linear index of `(i_0, .., i_{K-1})` is
//! `i_0 + n_0 * (i_1 + n_1 * (..))`. The mode-k unfolding places mode k on
//! the rows and enumerates the remaining modes in ascending order with the
//! lowest one varying fastest, so that
//! `unfold([[G; U]], k) = U_k * unfold(G, k) * (U_{K-1} ⊗ .. ⊗ U_{k+1} ⊗ U_{k-1} ⊗ .. ⊗ U_0)^T`.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Column-major dense matrix of `f64`.
pub type Matrix = DMatrix<f64>;

/// Mode sizes of a tensor. Every dimension is at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("a tensor needs at least one mode".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("mode {pos} has size 0")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidShape("element count overflows usize".into()))?;
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    pub fn dim(&self, k: usize) -> usize {
        self.0[k]
    }

    /// Copy of this shape with mode `k` resized.
    pub fn with_dim(&self, k: usize, size: usize) -> Shape {
        let mut dims = self.0.clone();
        dims[k] = size;
        Shape(dims)
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode: k,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// `(prod of dims before k, dims[k], prod of dims after k)`.
    fn split(&self, k: usize) -> (usize, usize, usize) {
        let left = self.0[..k].iter().product();
        let right = self.0[k + 1..].iter().product();
        (left, self.0[k], right)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Dense real tensor in mode-0-fastest order. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape} needs {} entries, got {}",
                shape.numel(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn from_dims(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        Self::new(Shape::new(dims.to_vec())?, data)
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.numel();
        DenseTensor {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Builds a tensor entry by entry from its multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut idx = vec![0usize; shape.order()];
        let mut data = Vec::with_capacity(shape.numel());
        for _ in 0..shape.numel() {
            data.push(f(&idx));
            for (i, n) in idx.iter_mut().zip(shape.dims()) {
                *i += 1;
                if *i < *n {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order());
        idx.iter().zip(self.dims()).rev().fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Sum of squared entries.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Frobenius inner product with a tensor of the same shape.
    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "shapes {} and {} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Slice `n` along the last mode, as a tensor with one mode fewer.
    pub fn sample(&self, n: usize) -> DenseTensor {
        let k = self.order() - 1;
        assert!(k >= 1, "sample() needs a tensor with a trailing sample mode");
        assert!(n < self.dims()[k], "sample index out of range");
        let stride: usize = self.dims()[..k].iter().product();
        DenseTensor {
            shape: Shape(self.dims()[..k].to_vec()),
            data: self.data[n * stride..(n + 1) * stride].to_vec(),
        }
    }

    pub fn num_samples(&self) -> usize {
        *self.dims().last().expect("non-empty shape")
    }

    /// Stacks equally shaped tensors along a new trailing mode.
    pub fn stack(samples: &[DenseTensor]) -> Result<DenseTensor> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidShape("cannot stack zero samples".into()))?;
        let mut data = Vec::with_capacity(first.data.len() * samples.len());
        for s in samples {
            first.same_shape(s)?;
            data.extend_from_slice(&s.data);
        }
        let mut dims = first.dims().to_vec();
        dims.push(samples.len());
        DenseTensor::new(Shape::new(dims)?, data)
    }

    /// Concatenates two tensors along their last mode.
    pub fn concat_last(&self, other: &DenseTensor) -> Result<DenseTensor> {
        let k = self.order() - 1;
        if self.order() != other.order() || self.dims()[..k] != other.dims()[..k] {
            return Err(Error::DimensionMismatch(format!(
                "cannot concatenate {} and {} along the last mode",
                self.shape, other.shape
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        let shape = self.shape.with_dim(k, self.dims()[k] + other.dims()[k]);
        Ok(DenseTensor { shape, data })
    }

    /// Splits along the last mode into `[0, at)` and `[at, n)`.
    pub fn split_last(&self, at: usize) -> Result<(DenseTensor, DenseTensor)> {
        let k = self.order() - 1;
        let n = self.dims()[k];
        if at == 0 || at >= n {
            return Err(Error::DimensionMismatch(format!("split point {at} outside (0, {n})")));
        }
        let stride: usize = self.dims()[..k].iter().product();
        let a = DenseTensor {
            shape: self.shape.with_dim(k, at),
            data: self.data[..at * stride].to_vec(),
        };
        let b = DenseTensor {
            shape: self.shape.with_dim(k, n - at),
            data: self.data[at * stride..].to_vec(),
        };
        Ok((a, b))
    }

    /// Selects samples along the last mode, in the given order.
    pub fn select_samples(&self, indices: &[usize]) -> Result<DenseTensor> {
        let k = self.order() - 1;
        let n = self.dims()[k];
        let stride: usize = self.dims()[..k].iter().product();
        let mut data = Vec::with_capacity(stride * indices.len());
        for &i in indices {
            if i >= n {
                return Err(Error::DimensionMismatch(format!("sample {i} out of {n}")));
            }
            data.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        let shape = Shape::new(self.shape.with_dim(k, indices.len()).0)?;
        Ok(DenseTensor { shape, data })
    }
}

/// Mode-k unfolding `X_(k)`, of size `n_k x prod_{j != k} n_j`.
pub fn unfold(x: &DenseTensor, k: usize) -> Result<Matrix> {
    x.shape.check_mode(k)?;
    let (left, nk, right) = x.shape.split(k);
    let mut m = Matrix::zeros(nk, left * right);
    for b in 0..right {
        for i in 0..nk {
            let src = &x.data[left * (i + nk * b)..left * (i + nk * b) + left];
            for (a, &v) in src.iter().enumerate() {
                m[(i, a + left * b)] = v;
            }
        }
    }
    Ok(m)
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, k: usize, shape: &Shape) -> Result<DenseTensor> {
    shape.check_mode(k)?;
    let (left, nk, right) = shape.split(k);
    if m.nrows() != nk || m.ncols() != left * right {
        return Err(Error::DimensionMismatch(format!(
            "a {}x{} matrix cannot fold into mode {k} of {shape}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut data = vec![0.0; shape.numel()];
    for b in 0..right {
        for i in 0..nk {
            let dst = &mut data[left * (i + nk * b)..left * (i + nk * b) + left];
            for (a, v) in dst.iter_mut().enumerate() {
                *v = m[(i, a + left * b)];
            }
        }
    }
    DenseTensor::new(shape.clone(), data)
}

/// Mode-k product `X x_k V`; mode k is resized to `v.nrows()`.
pub fn mode_product(x: &DenseTensor, v: &Matrix, k: usize) -> Result<DenseTensor> {
    x.shape.check_mode(k)?;
    let (left, nk, right) = x.shape.split(k);
    if v.ncols() != nk {
        return Err(Error::DimensionMismatch(format!(
            "mode {k} has size {nk} but the matrix has {} columns",
            v.ncols()
        )));
    }
    let m = v.nrows();
    let shape = x.shape.with_dim(k, m);
    let mut out = vec![0.0; left * m * right];
    for b in 0..right {
        for i in 0..nk {
            let src = &x.data[left * (i + nk * b)..left * (i + nk * b) + left];
            for r in 0..m {
                let w = v[(r, i)];
                if w == 0.0 {
                    continue;
                }
                let dst = &mut out[left * (r + m * b)..left * (r + m * b) + left];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    DenseTensor::new(shape, out)
}

/// Applies a list of mode products in order. Each mode may appear at most once.
pub fn multi_mode_product(x: &DenseTensor, ops: &[(&Matrix, usize)]) -> Result<DenseTensor> {
    let mut seen = vec![false; x.order()];
    for &(_, k) in ops {
        x.shape.check_mode(k)?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::DuplicateMode(k));
        }
    }
    let mut out = x.clone();
    for &(v, k) in ops {
        out = mode_product(&out, v, k)?;
    }
    Ok(out)
}

/// Kronecker product; block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

pub fn frobenius_norm(x: &DenseTensor) -> f64 {
    x.frobenius_norm()
}
