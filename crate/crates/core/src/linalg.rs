//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{SymmetricEigen, QR, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Matrix, Result};

/// Flips each column so that its entry of largest magnitude is non-negative.
/// Ties go to the lowest row index.
pub fn fix_column_signs(m: &mut Matrix) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// `‖AᵀA − I‖_F`.
pub fn column_orthonormality_error(a: &Matrix) -> f64 {
    let g = a.transpose() * a;
    (g - Matrix::identity(a.ncols(), a.ncols())).norm()
}

/// `‖AAᵀ − I‖_F`.
pub fn row_orthonormality_error(a: &Matrix) -> f64 {
    let g = a * a.transpose();
    (g - Matrix::identity(a.nrows(), a.nrows())).norm()
}

/// Extends the orthonormal columns of `basis` to `d` columns with modified
/// Gram–Schmidt against the canonical vectors `e_0, e_1, ..`, skipping any
/// that are (numerically) already in the span.
pub fn complete_orthonormal_basis(basis: &Matrix, d: usize) -> Result<Matrix> {
    let n = basis.nrows();
    if d > n {
        return Err(Error::DimensionMismatch(format!(
            "cannot fit {d} orthonormal columns in R^{n}"
        )));
    }
    let mut cols: Vec<nalgebra::DVector<f64>> = basis.column_iter().take(d).map(|c| c.into_owned()).collect();
    let mut candidate = 0;
    while cols.len() < d {
        if candidate == n {
            return Err(Error::RankDeficient("canonical basis exhausted".into()));
        }
        let mut v = nalgebra::DVector::zeros(n);
        v[candidate] = 1.0;
        candidate += 1;
        // Two passes keep the result orthonormal to roundoff.
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v.axpy(-proj, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    Ok(Matrix::from_columns(&cols))
}

/// Leading `d` left singular vectors of `a`, sorted by decreasing singular
/// value, with the column sign convention of [`fix_column_signs`]. When `a`
/// has numerical rank below `d` the missing directions are completed by
/// [`complete_orthonormal_basis`].
pub fn leading_left_singular_vectors(a: &Matrix, d: usize) -> Result<Matrix> {
    let n = a.nrows();
    if d > n {
        return Err(Error::DimensionMismatch(format!(
            "requested {d} singular vectors of an {n}-row matrix"
        )));
    }
    if d == 0 {
        return Ok(Matrix::zeros(n, 0));
    }
    let svd = SVD::try_new(a.clone(), true, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::RankDeficient("SVD failed to converge".into()))?;
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = smax * f64::EPSILON * (a.nrows().max(a.ncols()) as f64);
    let rank = sv.iter().filter(|&&s| s > tol).count();
    let keep = rank.min(d);
    let mut lead = u.columns(0, keep).into_owned();
    fix_column_signs(&mut lead);
    if keep == d {
        return Ok(lead);
    }
    complete_orthonormal_basis(&lead, d)
}

/// Thin QR projection onto matrices with orthonormal columns. Columns are
/// signed so that the triangular factor has a non-negative diagonal, which
/// makes the map the identity on already-orthonormal input.
pub fn orthonormalize_columns(p: &Matrix) -> Result<Matrix> {
    let (n, d) = p.shape();
    if d > n {
        return Err(Error::RankDeficient(format!(
            "{n}x{d} matrix cannot have orthonormal columns"
        )));
    }
    let qr = QR::new(p.clone());
    let r = qr.r();
    let mut q = qr.q();
    let scale = p.norm().max(1.0);
    for j in 0..d {
        if r[(j, j)].abs() <= 1e-12 * scale {
            return Err(Error::RankDeficient(format!("column {j} is linearly dependent")));
        }
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
pub fn sorted_symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<_> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    (values, Matrix::from_columns(&cols))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random `n x d` matrix with orthonormal columns (QR of a Gaussian matrix).
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Matrix {
    loop {
        let g = gaussian_matrix(rng, n, d);
        if let Ok(q) = orthonormalize_columns(&g) {
            return q;
        }
    }
}
