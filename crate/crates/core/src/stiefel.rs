//! Orthogonality-constrained quadratic minimisation.
//!
//! Minimises
//!
//! ```text
//! F(P) = tr(Pᵀ A P) − 2 tr(Pᵀ B) + c₀ − λ tr(Pᵀ C P)   subject to PᵀP = I
//! ```
//!
//! with a curvilinear Cayley-transform search: given the ambient gradient
//! `G`, the skew matrix `W = G Pᵀ − P Gᵀ` defines the feasible curve
//! `P(τ) = (I + τ/2 W)⁻¹ (I − τ/2 W) P`. Step sizes come from alternating
//! Barzilai–Borwein estimates safeguarded by Armijo backtracking.

use nalgebra::LU;

use crate::linalg::{column_orthonormality_error, orthonormalize_columns, sorted_symmetric_eigen};
use crate::{Error, Matrix, Result};

/// Feasibility tolerance accepted for inputs.
const FEASIBLE_TOL: f64 = 1e-8;
/// Drift beyond which iterates are pulled back onto the manifold.
const DRIFT_TOL: f64 = 1e-10;

/// Gram-matrix form of the quadratic objective.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticStiefelProblem {
    /// `n x n`, symmetric PSD.
    pub a: Matrix,
    /// `n x d`.
    pub b: Matrix,
    /// `n x n`, symmetric PSD.
    pub c: Matrix,
    pub const_term: f64,
    pub lambda: f64,
}

impl QuadraticStiefelProblem {
    /// Checks dimensions and that `A` and `C` are symmetric PSD within `1e-8`
    /// (relative to their norm).
    pub fn new(a: Matrix, b: Matrix, c: Matrix, const_term: f64, lambda: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || c.shape() != (n, n) || b.nrows() != n || b.ncols() > n || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "A {:?}, B {:?}, C {:?} are inconsistent",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda = {lambda} must be finite and >= 0"
            )));
        }
        for (name, m) in [("A", &a), ("C", &c)] {
            let tol = 1e-8 * (1.0 + m.norm());
            if (m - m.transpose()).norm() > tol {
                return Err(Error::InvalidConfig(format!("{name} is not symmetric")));
            }
            let (ev, _) = sorted_symmetric_eigen(m);
            if ev.last().is_some_and(|&e| e < -tol) {
                return Err(Error::InvalidConfig(format!("{name} is not positive semidefinite")));
            }
        }
        Ok(QuadraticStiefelProblem {
            a,
            b,
            c,
            const_term,
            lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.b.ncols()
    }

    fn curvature(&self) -> Matrix {
        &self.a - self.c.scale(self.lambda)
    }

    /// Objective at any `n x d` matrix, feasible or not.
    pub fn loss_at(&self, p: &Matrix) -> f64 {
        let hp = self.curvature() * p;
        p.dot(&hp) - 2.0 * p.dot(&self.b) + self.const_term
    }

    /// Ambient (Euclidean) gradient `2(A − λC)P − 2B` at any `n x d` matrix.
    pub fn gradient_at(&self, p: &Matrix) -> Matrix {
        (self.curvature() * p - &self.b).scale(2.0)
    }

    fn check_point(&self, p: &Matrix) -> Result<()> {
        if p.shape() != self.b.shape() {
            return Err(Error::DimensionMismatch(format!(
                "P is {:?}, problem expects {:?}",
                p.shape(),
                self.b.shape()
            )));
        }
        let dev = column_orthonormality_error(p);
        if dev > FEASIBLE_TOL {
            return Err(Error::NotOrthonormal { deviation: dev });
        }
        Ok(())
    }
}

/// Loss and ambient gradient at a feasible point.
pub fn loss_and_grad(p: &Matrix, prob: &QuadraticStiefelProblem) -> Result<(f64, Matrix)> {
    prob.check_point(p)?;
    Ok((prob.loss_at(p), prob.gradient_at(p)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiefelSolverOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    pub bb_step: bool,
    pub armijo_c: f64,
    pub step_shrink: f64,
    /// Zhang–Hager nonmonotone line search with this averaging weight.
    /// `None` keeps the search monotone.
    pub nonmonotone: Option<f64>,
}

impl Default for StiefelSolverOptions {
    fn default() -> Self {
        StiefelSolverOptions {
            max_iters: 200,
            grad_tol: 1e-6,
            initial_step: 1e-3,
            bb_step: true,
            armijo_c: 1e-4,
            step_shrink: 0.5,
            nonmonotone: None,
        }
    }
}

impl StiefelSolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grad_tol > 0.0
            && self.initial_step > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.step_shrink > 0.0
            && self.step_shrink < 1.0
            && self.nonmonotone.is_none_or(|eta| (0.0..1.0).contains(&eta));
        if !ok {
            return Err(Error::InvalidConfig(format!("bad Stiefel solver options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StiefelSolution {
    pub p: Matrix,
    /// Loss at the start point followed by the loss after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Norm of the tangent-space projection of the final ambient gradient.
    pub grad_norm: f64,
    pub converged: bool,
    /// Largest `‖PᵀP − I‖_F` seen over all iterates.
    pub max_feasibility_error: f64,
}

/// Euclidean projection of `g` onto the tangent space at `p`.
fn tangent_projection(p: &Matrix, g: &Matrix) -> Matrix {
    let ptg = p.transpose() * g;
    let sym = (&ptg + ptg.transpose()).scale(0.5);
    g - p * sym
}

/// `(I + τ/2 W)⁻¹ (I − τ/2 W) P`, or `None` if the system is singular.
fn cayley_step(p: &Matrix, w: &Matrix, tau: f64) -> Option<Matrix> {
    let n = p.nrows();
    let half = w.scale(0.5 * tau);
    let lhs = Matrix::identity(n, n) + &half;
    let rhs = p - &half * p;
    LU::new(lhs).solve(&rhs)
}

/// Curvilinear search on the Stiefel manifold starting from `p0`.
pub fn minimize_on_stiefel(
    prob: &QuadraticStiefelProblem,
    p0: &Matrix,
    opts: &StiefelSolverOptions,
) -> Result<StiefelSolution> {
    opts.validate()?;
    prob.check_point(p0)?;
    let mut p = p0.clone();
    let mut max_feas = column_orthonormality_error(&p);
    let mut f = prob.loss_at(&p);
    let mut g = prob.gradient_at(&p);
    let mut rg = tangent_projection(&p, &g);
    let mut trace = vec![f];
    let mut tau = opts.initial_step;
    // Nonmonotone reference value and weight.
    let mut reference = f;
    let mut weight = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        if rg.norm() < opts.grad_tol {
            converged = true;
            break;
        }
        let w = &g * p.transpose() - &p * g.transpose();
        // dF/dτ at τ = 0 along the Cayley curve.
        let slope = -0.5 * w.norm_squared();
        let bound = if opts.nonmonotone.is_some() { reference } else { f };

        let mut accepted = None;
        let mut t = tau;
        for _ in 0..60 {
            if let Some(candidate) = cayley_step(&p, &w, t) {
                let fc = prob.loss_at(&candidate);
                if fc.is_finite() && fc <= bound + opts.armijo_c * t * slope {
                    accepted = Some((candidate, fc, t));
                    break;
                }
            }
            t *= opts.step_shrink;
        }
        let Some((mut next, f_next, t_used)) = accepted else {
            // No step gives sufficient decrease: the iterate is stationary to
            // working precision.
            break;
        };
        iterations += 1;

        let drift = column_orthonormality_error(&next);
        max_feas = max_feas.max(drift);
        if drift > DRIFT_TOL {
            next = orthonormalize_columns(&next)?;
        }
        let f_next = if drift > DRIFT_TOL { prob.loss_at(&next) } else { f_next };
        let g_next = prob.gradient_at(&next);
        let rg_next = tangent_projection(&next, &g_next);

        tau = if opts.bb_step {
            let s = &next - &p;
            let y = &rg_next - &rg;
            let sy = s.dot(&y).abs();
            let step = if iterations % 2 == 0 {
                s.norm_squared() / sy
            } else {
                sy / y.norm_squared()
            };
            if step.is_finite() && step > 0.0 {
                step.clamp(1e-20, 1e20)
            } else {
                t_used
            }
        } else {
            opts.initial_step
        };

        if let Some(eta) = opts.nonmonotone {
            let new_weight = eta * weight + 1.0;
            reference = (eta * weight * reference + f_next) / new_weight;
            weight = new_weight;
        }

        p = next;
        f = f_next;
        g = g_next;
        rg = rg_next;
        trace.push(f);
    }
    let grad_norm = rg.norm();
    if !converged && grad_norm < opts.grad_tol {
        converged = true;
    }
    Ok(StiefelSolution {
        p,
        trace,
        iterations,
        grad_norm,
        converged,
        max_feasibility_error: max_feas,
    })
}

/// QR-based projection onto matrices with orthonormal columns.
pub fn reorthonormalize(p: &Matrix) -> Result<Matrix> {
    orthonormalize_columns(p)
}
