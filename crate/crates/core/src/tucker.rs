//! Truncated Tucker decomposition: HOSVD initialisation with HOOI sweeps,
//! plus projection onto and reconstruction from a tensor subspace.

use crate::linalg::{column_orthonormality_error, leading_left_singular_vectors};
use crate::tensor::{mode_product, unfold};
use crate::{DenseTensor, Error, Matrix, Result};

/// Column-orthonormal factor matrices, one per structural mode.
///
/// Factor `k` is `n_k x d_k`. A tensor handed to [`project`] or
/// [`reconstruct`] may carry extra trailing modes (typically the sample
/// mode); those are left untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSubspace {
    factors: Vec<Matrix>,
}

impl TensorSubspace {
    /// Validates column orthonormality at `1e-10`.
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidShape("a subspace needs at least one factor".into()));
        }
        for u in &factors {
            if u.ncols() > u.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "factor is {}x{}, needs d_k <= n_k",
                    u.nrows(),
                    u.ncols()
                )));
            }
            let dev = column_orthonormality_error(u);
            if dev > 1e-10 {
                return Err(Error::NotOrthonormal { deviation: dev });
            }
        }
        Ok(TensorSubspace { factors })
    }

    pub fn identity(dims: &[usize]) -> Self {
        TensorSubspace {
            factors: dims.iter().map(|&n| Matrix::identity(n, n)).collect(),
        }
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Ambient mode sizes `n_k`.
    pub fn ambient_dims(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.nrows()).collect()
    }

    /// Subspace dimensions `d_k`.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.ncols()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuckerModel {
    pub subspace: TensorSubspace,
    pub core: DenseTensor,
}

impl TuckerModel {
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        reconstruct(&self.core, &self.subspace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HooiOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for HooiOptions {
    fn default() -> Self {
        HooiOptions {
            max_iters: 5,
            tol: 1e-8,
        }
    }
}

/// Per-mode target ranks for a tensor, with modes in `skip` left unfactored.
///
/// `dims` is indexed by mode; skipped modes get an identity factor and their
/// entry in `dims` is ignored (it may be omitted when the skipped modes are
/// trailing).
fn resolve_ranks(x: &DenseTensor, dims: &[usize], skip: &[usize]) -> Result<Vec<Option<usize>>> {
    let mut ranks = Vec::with_capacity(x.order());
    for k in 0..x.order() {
        if skip.contains(&k) {
            ranks.push(None);
            continue;
        }
        let d = *dims
            .get(k)
            .ok_or_else(|| Error::InvalidConfig(format!("no target dimension given for mode {k}")))?;
        let n = x.dims()[k];
        if d == 0 || d > n {
            return Err(Error::InvalidConfig(format!("mode {k}: d = {d} must lie in 1..={n}")));
        }
        ranks.push(Some(d));
    }
    Ok(ranks)
}

fn core_and_model(x: &DenseTensor, factors: Vec<Option<Matrix>>) -> Result<TuckerModel> {
    let mut core = x.clone();
    for (k, u) in factors.iter().enumerate() {
        if let Some(u) = u {
            core = mode_product(&core, &u.transpose(), k)?;
        }
    }
    let kept: Vec<Matrix> = factors.into_iter().flatten().collect();
    Ok(TuckerModel {
        subspace: TensorSubspace::new(kept)?,
        core,
    })
}

/// Truncated higher-order SVD.
///
/// Factored modes must be a leading run of modes (skip modes trailing), which
/// is how the sample mode is handled throughout the crate.
pub fn hosvd(x: &DenseTensor, dims: &[usize], skip: &[usize]) -> Result<TuckerModel> {
    let ranks = resolve_ranks(x, dims, skip)?;
    check_leading(&ranks)?;
    let mut factors = Vec::with_capacity(ranks.len());
    for (k, r) in ranks.iter().enumerate() {
        factors.push(match r {
            Some(d) => Some(leading_left_singular_vectors(&unfold(x, k)?, *d)?),
            None => None,
        });
    }
    core_and_model(x, factors)
}

fn check_leading(ranks: &[Option<usize>]) -> Result<()> {
    let first_skip = ranks.iter().position(Option::is_none).unwrap_or(ranks.len());
    if ranks[first_skip..].iter().any(Option::is_some) {
        return Err(Error::InvalidConfig(
            "skipped modes must come after all factored modes".into(),
        ));
    }
    if first_skip == 0 {
        return Err(Error::InvalidConfig("at least one mode must be factored".into()));
    }
    Ok(())
}

/// Residual `‖x − [[G; U]]‖_F`.
fn fit_error(x: &DenseTensor, model: &TuckerModel) -> Result<f64> {
    Ok(x.sub(&model.reconstruct()?)?.frobenius_norm())
}

/// HOOI refinement of [`hosvd`]. Returns the model and the fit error after
/// the HOSVD start and after every completed sweep.
pub fn hooi_with_trace(
    x: &DenseTensor,
    dims: &[usize],
    skip: &[usize],
    opts: HooiOptions,
) -> Result<(TuckerModel, Vec<f64>)> {
    let mut model = hosvd(x, dims, skip)?;
    let mut errors = vec![fit_error(x, &model)?];
    let norm = x.frobenius_norm().max(f64::MIN_POSITIVE);
    let factored = model.subspace.order();
    for _ in 0..opts.max_iters {
        let mut factors: Vec<Matrix> = model.subspace.factors.clone();
        for k in 0..factored {
            let mut partial = x.clone();
            for (j, u) in factors.iter().enumerate() {
                if j != k {
                    partial = mode_product(&partial, &u.transpose(), j)?;
                }
            }
            factors[k] = leading_left_singular_vectors(&unfold(&partial, k)?, factors[k].ncols())?;
        }
        let candidate = core_and_model(x, factors.into_iter().map(Some).collect())?;
        let err = fit_error(x, &candidate)?;
        let prev = *errors.last().expect("non-empty");
        // A sweep never increases the residual in exact arithmetic; keep the
        // better model if roundoff says otherwise.
        if err > prev {
            break;
        }
        model = candidate;
        errors.push(err);
        if (prev - err) / norm < opts.tol {
            break;
        }
    }
    Ok((model, errors))
}

pub fn hooi(x: &DenseTensor, dims: &[usize], skip: &[usize], opts: HooiOptions) -> Result<TuckerModel> {
    hooi_with_trace(x, dims, skip, opts).map(|(m, _)| m)
}

fn check_leading_dims(x: &DenseTensor, sizes: &[usize], what: &str) -> Result<()> {
    if x.order() < sizes.len() || x.dims()[..sizes.len()] != *sizes {
        return Err(Error::DimensionMismatch(format!(
            "tensor of shape {} does not match {what} sizes {sizes:?}",
            x.shape()
        )));
    }
    Ok(())
}

/// Core `G = x ×_0 U_0ᵀ ×_1 .. ×_{K-1} U_{K-1}ᵀ`.
pub fn project(x: &DenseTensor, u: &TensorSubspace) -> Result<DenseTensor> {
    check_leading_dims(x, &u.ambient_dims(), "subspace ambient")?;
    let mut out = x.clone();
    for (k, f) in u.factors.iter().enumerate() {
        out = mode_product(&out, &f.transpose(), k)?;
    }
    Ok(out)
}

/// `[[G; U]] = G ×_0 U_0 ×_1 .. ×_{K-1} U_{K-1}`.
pub fn reconstruct(g: &DenseTensor, u: &TensorSubspace) -> Result<DenseTensor> {
    check_leading_dims(g, &u.dims(), "subspace core")?;
    let mut out = g.clone();
    for (k, f) in u.factors.iter().enumerate() {
        out = mode_product(&out, f, k)?;
    }
    Ok(out)
}
