//! Shared tensor-subspace learning (NTSL) and tensor-aligned invariant
//! subspace learning (TAISL).
//!
//! Both domains are batches of K-mode samples stacked along a trailing
//! sample mode. NTSL fits one Tucker subspace to the concatenated batches.
//! TAISL additionally learns one orthogonal alignment matrix per mode and
//! alternates between
//!
//! * a subspace step: joint Tucker fit of `[[X_s; M]]` and `X_t`, and
//! * an alignment step: for each mode `k`, an orthogonality-constrained
//!   quadratic in `Pᵀ = M_k` built from per-sample Gram accumulations.

use log::warn;
use rayon::prelude::*;

use crate::linalg::{row_orthonormality_error, sorted_symmetric_eigen};
use crate::stiefel::{minimize_on_stiefel, QuadraticStiefelProblem, StiefelSolverOptions};
use crate::tensor::{mode_product, unfold};
use crate::tucker::{hooi, project, reconstruct, HooiOptions, TensorSubspace};
use crate::{DenseTensor, Error, Matrix, Result};

/// Samples stacked on the last mode, with optional integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTensorSet {
    pub data: DenseTensor,
    pub labels: Option<Vec<usize>>,
}

impl LabeledTensorSet {
    pub fn new(data: DenseTensor, labels: Option<Vec<usize>>) -> Result<Self> {
        if data.order() < 3 {
            return Err(Error::InvalidShape(format!(
                "a sample set needs at least two structural modes plus the sample mode, got {}",
                data.shape()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != data.num_samples() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} samples",
                    l.len(),
                    data.num_samples()
                )));
            }
        }
        Ok(LabeledTensorSet { data, labels })
    }

    pub fn num_samples(&self) -> usize {
        self.data.num_samples()
    }

    /// Structural mode sizes (everything but the sample mode).
    pub fn sample_dims(&self) -> &[usize] {
        let d = self.data.dims();
        &d[..d.len() - 1]
    }

    pub fn class_count(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.iter().max()).map_or(0, |m| m + 1)
    }
}

/// Row-orthonormal alignment matrices, `M_k` of size `m_k x n_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentSet {
    mats: Vec<Matrix>,
}

impl AlignmentSet {
    /// Validates `M_k M_kᵀ = I` within `1e-8`.
    pub fn new(mats: Vec<Matrix>) -> Result<Self> {
        for m in &mats {
            if m.nrows() > m.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "alignment matrix {}x{} cannot be row-orthonormal",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let dev = row_orthonormality_error(m);
            if dev > 1e-8 {
                return Err(Error::NotOrthonormal { deviation: dev });
            }
        }
        Ok(AlignmentSet { mats })
    }

    pub fn identity(dims: &[usize]) -> Self {
        AlignmentSet {
            mats: dims.iter().map(|&n| Matrix::identity(n, n)).collect(),
        }
    }

    pub fn mats(&self) -> &[Matrix] {
        &self.mats
    }

    pub fn order(&self) -> usize {
        self.mats.len()
    }

    /// `[[x; M]]` over the leading modes; trailing modes are left alone.
    pub fn apply(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let mut out = x.clone();
        for (k, m) in self.mats.iter().enumerate() {
            out = mode_product(&out, m, k)?;
        }
        Ok(out)
    }

    /// `[[x; Mᵀ]]`.
    pub fn apply_transpose(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let mut out = x.clone();
        for (k, m) in self.mats.iter().enumerate() {
            out = mode_product(&out, &m.transpose(), k)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    /// Subspace dimensions, one per structural mode.
    pub dims: Vec<usize>,
    pub lambda: f64,
    pub max_outer_iters: usize,
    /// Relative loss change below which the outer loop stops.
    pub outer_tol: f64,
    pub hooi: HooiOptions,
    pub stiefel: StiefelSolverOptions,
}

impl AdaptationConfig {
    pub fn new(dims: Vec<usize>) -> Self {
        AdaptationConfig {
            dims,
            lambda: 1e-5,
            max_outer_iters: 10,
            outer_tol: 1e-4,
            hooi: HooiOptions::default(),
            stiefel: StiefelSolverOptions::default(),
        }
    }

    /// Defaults for a given sample layout: `(6, 6, 128)` for 3-mode
    /// (spatial x spatial x channel) samples, `ceil(n_k / 2)` otherwise,
    /// each capped at the mode size.
    pub fn default_dims(sample_dims: &[usize]) -> Vec<usize> {
        if sample_dims.len() == 3 {
            [6, 6, 128].iter().zip(sample_dims).map(|(&d, &n)| d.min(n)).collect()
        } else {
            sample_dims.iter().map(|&n| n.div_ceil(2).min(n)).collect()
        }
    }

    fn validate(&self, sample_dims: &[usize]) -> Result<()> {
        if self.dims.len() != sample_dims.len() {
            return Err(Error::InvalidConfig(format!(
                "{} subspace dims for {} structural modes",
                self.dims.len(),
                sample_dims.len()
            )));
        }
        for (k, (&d, &n)) in self.dims.iter().zip(sample_dims).enumerate() {
            if d == 0 || d > n {
                return Err(Error::InvalidConfig(format!("mode {k}: d = {d} must lie in 1..={n}")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda = {} must be >= 0", self.lambda)));
        }
        if self.outer_tol.is_nan() || self.outer_tol < 0.0 {
            return Err(Error::InvalidConfig("outer_tol must be >= 0".into()));
        }
        self.stiefel.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationModel {
    pub subspace: TensorSubspace,
    pub alignment: AlignmentSet,
    pub g_source: DenseTensor,
    pub g_target: DenseTensor,
    /// `(outer iteration, total loss)`, iterations counted from one.
    pub loss_trace: Vec<(usize, f64)>,
    /// Convergence warnings raised while fitting.
    pub warnings: Vec<String>,
}

fn check_domains(xs: &LabeledTensorSet, xt: &LabeledTensorSet) -> Result<()> {
    if xs.sample_dims() != xt.sample_dims() {
        return Err(Error::DimensionMismatch(format!(
            "source samples are {:?}, target samples are {:?}",
            xs.sample_dims(),
            xt.sample_dims()
        )));
    }
    Ok(())
}

/// Joint Tucker fit of two sample batches; returns the subspace and the
/// two core batches.
fn joint_subspace(
    source: &DenseTensor,
    target: &DenseTensor,
    cfg: &AdaptationConfig,
) -> Result<(TensorSubspace, DenseTensor, DenseTensor)> {
    let sample_mode = source.order() - 1;
    let joint = source.concat_last(target)?;
    let fit = hooi(&joint, &cfg.dims, &[sample_mode], cfg.hooi)?;
    let (gs, gt) = fit.core.split_last(source.num_samples())?;
    Ok((fit.subspace, gs, gt))
}

/// Shared tensor subspace without alignment.
pub fn ntsl_fit(xs: &LabeledTensorSet, xt: &LabeledTensorSet, cfg: &AdaptationConfig) -> Result<AdaptationModel> {
    check_domains(xs, xt)?;
    cfg.validate(xs.sample_dims())?;
    let (subspace, g_source, g_target) = joint_subspace(&xs.data, &xt.data, cfg)?;
    Ok(AdaptationModel {
        subspace,
        alignment: AlignmentSet::identity(xs.sample_dims()),
        g_source,
        g_target,
        loss_trace: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Gram accumulations for the mode-`k` alignment subproblem.
///
/// For every sample `n`: `Q_n = unfold_k(x_n ×_{j≠k} M_j)`, `Y_n = unfold_k(y_n)`,
/// `X_n = unfold_k(x_n)`. Returns `A = Σ Q_n Q_nᵀ`, `B = Σ Q_n Y_nᵀ`,
/// `C = Σ X_n X_nᵀ` and `Σ ‖Y_n‖²`, summed in sample order.
pub fn precompute_mstep(
    xs_data: &DenseTensor,
    m: &AlignmentSet,
    y: &DenseTensor,
    k: usize,
    lambda: f64,
) -> Result<QuadraticStiefelProblem> {
    let modes = xs_data.order() - 1;
    if m.order() != modes || k >= modes {
        return Err(Error::DimensionMismatch(format!(
            "{} alignment matrices / mode {k} for {modes} structural modes",
            m.order()
        )));
    }
    let aligned_dims: Vec<usize> = m.mats.iter().map(|mj| mj.nrows()).collect();
    if y.dims()[..modes] != aligned_dims[..] || y.num_samples() != xs_data.num_samples() {
        return Err(Error::DimensionMismatch(format!(
            "auxiliary batch {} does not match the aligned source layout {aligned_dims:?}",
            y.shape()
        )));
    }
    if let Some(j) = (0..modes).find(|&j| m.mats[j].ncols() != xs_data.dims()[j]) {
        return Err(Error::DimensionMismatch(format!("M_{j} does not match mode {j}")));
    }

    let parts: Vec<Result<(Matrix, Matrix, Matrix, f64)>> = (0..xs_data.num_samples())
        .into_par_iter()
        .map(|n| {
            let x = xs_data.sample(n);
            let mut q = x.clone();
            for (j, mj) in m.mats.iter().enumerate() {
                if j != k {
                    q = mode_product(&q, mj, j)?;
                }
            }
            let qk = unfold(&q, k)?;
            let yn = y.sample(n);
            let yk = unfold(&yn, k)?;
            let xk = unfold(&x, k)?;
            Ok((
                &qk * qk.transpose(),
                &qk * yk.transpose(),
                &xk * xk.transpose(),
                yn.norm_sq(),
            ))
        })
        .collect();

    let nk = xs_data.dims()[k];
    let dk = m.mats[k].nrows();
    let mut a = Matrix::zeros(nk, nk);
    let mut b = Matrix::zeros(nk, dk);
    let mut c = Matrix::zeros(nk, nk);
    let mut const_term = 0.0;
    for part in parts {
        let (qq, qy, xx, yy) = part?;
        a += qq;
        b += qy;
        c += xx;
        const_term += yy;
    }
    // Exact symmetry; the products above are symmetric only to roundoff.
    let a = (&a + a.transpose()).scale(0.5);
    let c = (&c + c.transpose()).scale(0.5);
    QuadraticStiefelProblem::new(a, b, c, const_term, lambda)
}

/// Individual terms of the TAISL objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub source_fit: f64,
    pub target_fit: f64,
    /// `‖[[[[X_s; M]]; Mᵀ]] − X_s‖²`.
    pub variance: f64,
    pub lambda: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.source_fit + self.target_fit + self.lambda * self.variance
    }
}

/// Objective terms by direct tensor arithmetic.
pub fn loss_terms(
    xs_data: &DenseTensor,
    xt_data: &DenseTensor,
    u: &TensorSubspace,
    m: &AlignmentSet,
    g_s: &DenseTensor,
    g_t: &DenseTensor,
    lambda: f64,
) -> Result<LossTerms> {
    let aligned = m.apply(xs_data)?;
    let source_fit = aligned.sub(&reconstruct(g_s, u)?)?.norm_sq();
    let target_fit = xt_data.sub(&reconstruct(g_t, u)?)?.norm_sq();
    let variance = variance_term(xs_data, m)?;
    Ok(LossTerms {
        source_fit,
        target_fit,
        variance,
        lambda,
    })
}

pub fn total_loss(
    xs_data: &DenseTensor,
    xt_data: &DenseTensor,
    u: &TensorSubspace,
    m: &AlignmentSet,
    g_s: &DenseTensor,
    g_t: &DenseTensor,
    lambda: f64,
) -> Result<f64> {
    loss_terms(xs_data, xt_data, u, m, g_s, g_t, lambda).map(|t| t.total())
}

/// `‖[[[[x; M]]; Mᵀ]] − x‖²`.
pub fn variance_term(x: &DenseTensor, m: &AlignmentSet) -> Result<f64> {
    let round_trip = m.apply_transpose(&m.apply(x)?)?;
    Ok(round_trip.sub(x)?.norm_sq())
}

/// Source path: align, then project onto the subspace.
pub fn transform_source(xs_data: &DenseTensor, model: &AdaptationModel) -> Result<DenseTensor> {
    project(&model.alignment.apply(xs_data)?, &model.subspace)
}

/// Target path: project onto the subspace.
pub fn transform_target(xt_data: &DenseTensor, model: &AdaptationModel) -> Result<DenseTensor> {
    project(xt_data, &model.subspace)
}

/// Alternating minimisation over the subspace and the alignment matrices.
///
/// `max_outer_iters = 0` performs no alignment step and returns the NTSL
/// model.
pub fn taisl_fit(xs: &LabeledTensorSet, xt: &LabeledTensorSet, cfg: &AdaptationConfig) -> Result<AdaptationModel> {
    check_domains(xs, xt)?;
    cfg.validate(xs.sample_dims())?;
    if cfg.max_outer_iters == 0 {
        return ntsl_fit(xs, xt, cfg);
    }
    let modes = xs.sample_dims().len();
    let mut m = AlignmentSet::identity(xs.sample_dims());
    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut warnings = Vec::new();
    // Solver problems are normalised by the source energy so the gradient
    // tolerance and initial step are scale free.
    let scale = 1.0 / xs.data.norm_sq().max(f64::MIN_POSITIVE);

    let mut state = None;
    let mut converged = false;
    for iter in 1..=cfg.max_outer_iters {
        let aligned = m.apply(&xs.data)?;
        let (u, g_s, _) = joint_subspace(&aligned, &xt.data, cfg)?;
        let y = reconstruct(&g_s, &u)?;

        for k in 0..modes {
            let prob = precompute_mstep(&xs.data, &m, &y, k, cfg.lambda)?;
            let prob = scaled(&prob, scale)?;
            let sol = minimize_on_stiefel(&prob, &m.mats[k].transpose(), &cfg.stiefel)?;
            if sol.trace.last() > sol.trace.first() {
                warnings.push(format!("outer {iter}, mode {k}: alignment step increased its loss"));
            }
            if !sol.converged {
                warnings.push(format!(
                    "outer {iter}, mode {k}: alignment solver stopped after {} iterations (gradient norm {:.3e})",
                    sol.iterations, sol.grad_norm
                ));
            }
            m.mats[k] = sol.p.transpose();
        }

        let aligned = m.apply(&xs.data)?;
        let g_s = project(&aligned, &u)?;
        let g_t = project(&xt.data, &u)?;
        let loss = total_loss(&xs.data, &xt.data, &u, &m, &g_s, &g_t, cfg.lambda)?;
        let prev = trace.last().map(|&(_, l)| l);
        trace.push((iter, loss));
        state = Some((u, g_s, g_t));

        if let Some(prev) = prev {
            let initial = trace[0].1;
            if loss > prev + 1e-6 * (1.0 + initial.abs()) {
                let msg = format!("outer {iter}: loss rose from {prev:.6e} to {loss:.6e}");
                warn!("{msg}");
                warnings.push(msg);
            }
            if (prev - loss).abs() <= cfg.outer_tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        warnings.push(format!(
            "relative loss change stayed above {:e} after {} outer iterations",
            cfg.outer_tol, cfg.max_outer_iters
        ));
    }
    let (subspace, g_source, g_target) = state.expect("at least one outer iteration");
    let alignment = AlignmentSet::new(m.mats)?;
    Ok(AdaptationModel {
        subspace,
        alignment,
        g_source,
        g_target,
        loss_trace: trace,
        warnings,
    })
}

fn scaled(p: &QuadraticStiefelProblem, s: f64) -> Result<QuadraticStiefelProblem> {
    QuadraticStiefelProblem::new(p.a.scale(s), p.b.scale(s), p.c.scale(s), p.const_term * s, p.lambda)
}

/// Vector-space PCA baseline: samples are flattened and projected onto the
/// leading principal components of the pooled, centred source and target.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `D x d` orthonormal basis.
    pub basis: Matrix,
}

pub fn pca_fit(xs: &LabeledTensorSet, xt: &LabeledTensorSet, components: usize) -> Result<PcaModel> {
    check_domains(xs, xt)?;
    let x = flatten_samples(&xs.data.concat_last(&xt.data)?);
    let (n, dim) = x.shape();
    if components == 0 || components > dim {
        return Err(Error::InvalidConfig(format!(
            "{components} components for {dim}-dim samples"
        )));
    }
    let mean: Vec<f64> = (0..dim).map(|j| x.column(j).sum() / n as f64).collect();
    let mut centred = x;
    for (j, mu) in mean.iter().enumerate() {
        centred.column_mut(j).add_scalar_mut(-mu);
    }
    let basis = if dim <= n {
        let (_, vecs) = sorted_symmetric_eigen(&(centred.transpose() * &centred));
        vecs.columns(0, components).into_owned()
    } else {
        crate::linalg::leading_left_singular_vectors(&centred.transpose(), components)?
    };
    let mut basis = basis;
    crate::linalg::fix_column_signs(&mut basis);
    Ok(PcaModel { mean, basis })
}

impl PcaModel {
    /// Projected features, one row per sample.
    pub fn transform(&self, data: &DenseTensor) -> Result<Matrix> {
        let mut x = flatten_samples(data);
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}-dim samples for a {}-dim PCA model",
                x.ncols(),
                self.mean.len()
            )));
        }
        for (j, mu) in self.mean.iter().enumerate() {
            x.column_mut(j).add_scalar_mut(-mu);
        }
        Ok(x * &self.basis)
    }
}

/// One row per sample holding the sample's entries in linear order.
pub fn flatten_samples(batch: &DenseTensor) -> Matrix {
    let n = batch.num_samples();
    let per = batch.data().len() / n;
    Matrix::from_fn(n, per, |i, j| batch.data()[i * per + j])
}
