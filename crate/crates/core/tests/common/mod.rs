#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tensorda::{DenseTensor, Matrix, Shape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
    let n = dims.iter().product();
    DenseTensor::from_dims(dims, (0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Every multi-index of `dims`, first index fastest.
pub fn indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    (0..total)
        .map(|mut lin| {
            dims.iter()
                .map(|&d| {
                    let i = lin % d;
                    lin /= d;
                    i
                })
                .collect()
        })
        .collect()
}

/// Mode product by direct summation over the contracted index.
pub fn naive_mode_product(x: &DenseTensor, v: &Matrix, k: usize) -> DenseTensor {
    let mut dims = x.dims().to_vec();
    dims[k] = v.nrows();
    DenseTensor::from_fn(Shape::new(dims).unwrap(), |idx| {
        let mut src = idx.to_vec();
        (0..v.ncols())
            .map(|i| {
                src[k] = i;
                v[(idx[k], i)] * x.get(&src)
            })
            .sum()
    })
    .unwrap()
}

pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn tensor_rel_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}
