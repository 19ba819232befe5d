//! Seeded source/target generator with a known Tucker structure.
//!
//! Each class owns a Gaussian core in a `r_1 x .. x r_K` subspace spanned
//! by random orthonormal factors `U*_k`. A sample is
//! `[[G_class + s·E; U*]]` plus ambient noise. Target samples are then
//! rotated along every mode by a ground-truth orthogonal `R_k`, so an
//! alignment set exists that maps the source distribution exactly onto
//! the target one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::adapt::{AlignmentSet, LabeledTensorSet};
use crate::linalg::random_orthonormal;
use crate::tensor::mode_product;
use crate::tucker::{reconstruct, TensorSubspace};
use crate::{DenseTensor, Error, Matrix, Result, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    /// Target rotated by `R_k` on every mode; both domains get noise `σ`.
    ModeRotation,
    /// No rotation; the target carries a fixed additive offset tensor with
    /// entries drawn from `N(0, σ²)` on top of its noise.
    AdditiveNoise,
    /// Rotation and offset together.
    Mixed,
}

impl std::str::FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mode_rotation" => Ok(ShiftKind::ModeRotation),
            "additive_noise" => Ok(ShiftKind::AdditiveNoise),
            "mixed" => Ok(ShiftKind::Mixed),
            _ => Err(Error::InvalidConfig(format!(
                "unknown shift kind {s:?} (expected mode_rotation, additive_noise or mixed)"
            ))),
        }
    }
}

impl std::fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShiftKind::ModeRotation => "mode_rotation",
            ShiftKind::AdditiveNoise => "additive_noise",
            ShiftKind::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    pub class_count: usize,
    pub samples_per_class: usize,
    /// Target samples per class; defaults to `samples_per_class`.
    pub target_per_class: Option<usize>,
    pub dims: Vec<usize>,
    pub true_dims: Vec<usize>,
    pub kind: ShiftKind,
    /// Half the principal angle, in radians, between the generating
    /// subspace of each mode and its rotated image (0.5 tilts by 1 rad).
    pub rotation_angle_scale: f64,
    pub noise_sigma: f64,
    /// Standard deviation of per-sample core perturbations around the
    /// class core (class cores have unit-variance entries).
    pub within_class_sigma: f64,
    pub seed: u64,
}

impl ShiftSpec {
    pub fn new(dims: Vec<usize>, true_dims: Vec<usize>) -> Self {
        ShiftSpec {
            class_count: 5,
            samples_per_class: 8,
            target_per_class: None,
            dims,
            true_dims,
            kind: ShiftKind::ModeRotation,
            rotation_angle_scale: 0.5,
            noise_sigma: 0.05,
            within_class_sigma: 1.0,
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.class_count == 0 || self.samples_per_class == 0 || self.target_per_class == Some(0) {
            return bad("class and sample counts must be positive".into());
        }
        if self.dims.len() < 2 || self.dims.len() != self.true_dims.len() {
            return bad(format!(
                "dims {:?} / true dims {:?} are inconsistent",
                self.dims, self.true_dims
            ));
        }
        if self
            .dims
            .iter()
            .zip(&self.true_dims)
            .any(|(&n, &r)| n == 0 || r == 0 || r > n)
        {
            return bad(format!(
                "true dims {:?} must lie within dims {:?}",
                self.true_dims, self.dims
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be finite and >= 0".into());
        }
        if !(self.within_class_sigma >= 0.0 && self.within_class_sigma.is_finite()) {
            return bad("within-class sigma must be finite and >= 0".into());
        }
        if !(self.rotation_angle_scale >= 0.0 && self.rotation_angle_scale.is_finite()) {
            return bad("rotation angle scale must be finite and >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticShift {
    pub source: LabeledTensorSet,
    pub target: LabeledTensorSet,
    /// `R_k`, mapping source-distributed samples onto the target domain.
    pub ground_truth: AlignmentSet,
    /// The generating subspace `U*`.
    pub subspace: TensorSubspace,
}

/// Rotation that tilts `span(basis)` toward its orthogonal complement:
/// `R = exp(angle · S / ‖S‖₂)` with the skew generator
/// `S = U⊥ B Uᵀ − U Bᵀ U⊥ᵀ` for a random `B`. The generator has no
/// component inside the subspace or inside its complement, so `R` is the
/// direct rotation from `span(U)` to `span(R U)`. When the complement is at
/// least as large as the subspace, `B` has orthonormal columns and every
/// principal angle equals `angle`; otherwise `B` is Gaussian and `angle` is
/// the largest principal angle (for `angle ≤ π/2`).
fn subspace_tilt(rng: &mut ChaCha8Rng, basis: &Matrix, angle: f64) -> Result<Matrix> {
    let (n, r) = basis.shape();
    let full = crate::linalg::complete_orthonormal_basis(basis, n)?;
    let complement = full.columns(r, n - r).into_owned();
    let b = if n - r >= r {
        random_orthonormal(rng, n - r, r)
    } else {
        crate::linalg::gaussian_matrix(rng, n - r, r)
    };
    if angle == 0.0 || r == n {
        return Ok(Matrix::identity(n, n));
    }
    let half = &complement * b * basis.transpose();
    let skew = &half - half.transpose();
    let norm = skew.singular_values().max();
    if norm <= f64::EPSILON {
        return Ok(Matrix::identity(n, n));
    }
    let rot = skew.scale(angle / norm).exp();
    // exp of a skew matrix is orthogonal up to roundoff; tidy it up.
    Ok(crate::linalg::orthonormalize_columns(&rot).unwrap_or(rot))
}

fn gaussian_tensor(rng: &mut ChaCha8Rng, shape: &Shape, sigma: f64) -> DenseTensor {
    let data = (0..shape.numel())
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    DenseTensor::new(shape.clone(), data).expect("finite gaussian draws")
}

pub fn generate_shift(spec: &ShiftSpec) -> Result<SyntheticShift> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let modes = spec.dims.len();
    let factors: Vec<Matrix> = spec
        .dims
        .iter()
        .zip(&spec.true_dims)
        .map(|(&n, &r)| random_orthonormal(&mut rng, n, r))
        .collect();
    let subspace = TensorSubspace::new(factors)?;

    let rotate = matches!(spec.kind, ShiftKind::ModeRotation | ShiftKind::Mixed);
    let mut rotations = Vec::with_capacity(modes);
    for u in subspace.factors() {
        let r = subspace_tilt(&mut rng, u, 2.0 * spec.rotation_angle_scale)?;
        rotations.push(if rotate {
            r
        } else {
            Matrix::identity(u.nrows(), u.nrows())
        });
    }
    let ground_truth = AlignmentSet::new(rotations)?;

    let core_shape = Shape::new(spec.true_dims.clone())?;
    let sample_shape = Shape::new(spec.dims.clone())?;
    let class_cores: Vec<DenseTensor> = (0..spec.class_count)
        .map(|_| gaussian_tensor(&mut rng, &core_shape, 1.0))
        .collect();
    let offset = match spec.kind {
        ShiftKind::ModeRotation => None,
        ShiftKind::AdditiveNoise | ShiftKind::Mixed => Some(gaussian_tensor(&mut rng, &sample_shape, spec.noise_sigma)),
    };

    let draw = |rng: &mut ChaCha8Rng, class: usize| -> Result<DenseTensor> {
        let jitter = gaussian_tensor(rng, &core_shape, spec.within_class_sigma);
        let core = class_cores[class].add(&jitter)?;
        let clean = reconstruct(&core, &subspace)?;
        clean.add(&gaussian_tensor(rng, &sample_shape, spec.noise_sigma))
    };

    let mut source = Vec::new();
    let mut source_labels = Vec::new();
    for c in 0..spec.class_count {
        for _ in 0..spec.samples_per_class {
            source.push(draw(&mut rng, c)?);
            source_labels.push(c);
        }
    }
    let mut target = Vec::new();
    let mut target_labels = Vec::new();
    for c in 0..spec.class_count {
        for _ in 0..spec.target_per_class.unwrap_or(spec.samples_per_class) {
            let mut x = draw(&mut rng, c)?;
            for k in 0..modes {
                x = mode_product(&x, &ground_truth.mats()[k], k)?;
            }
            if let Some(off) = &offset {
                x = x.add(off)?;
            }
            target.push(x);
            target_labels.push(c);
        }
    }
    Ok(SyntheticShift {
        source: LabeledTensorSet::new(DenseTensor::stack(&source)?, Some(source_labels))?,
        target: LabeledTensorSet::new(DenseTensor::stack(&target)?, Some(target_labels))?,
        ground_truth,
        subspace,
    })
}
