//! First-order solvers for the convex programs: ADMM for the cone-constrained
//! group lasso, FISTA for the complex lasso and proximal gradient with
//! singular value thresholding for nuclear-norm regression.

mod admm;
mod columns;
mod fista;
mod nuclear;

use serde::{Deserialize, Serialize};

use crate::numerics::vector::norm2;
use crate::numerics::{nnls, svd};
use crate::{Error, Matrix, Result};

pub use admm::solve_group_cone;
pub use fista::fista_complex_lasso;
pub use nuclear::{nuclear_dual_check, solve_nuclear, NuclearCheck};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Initial ADMM penalty.
    pub rho: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Convergence requires a certified gap `≤ gap_tol · (1 + |objective|)`.
    pub gap_tol: f64,
    /// Iterations between certificate checks.
    pub check_every: usize,
    /// Newton refinement of the ADMM iterate on its identified support.
    pub polish: bool,
    /// Residual balancing of `rho`.
    pub adapt_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            tol_abs: 1e-9,
            tol_rel: 1e-9,
            max_iter: 20_000,
            seed: 0,
            gap_tol: 1e-9,
            check_every: 25,
            polish: true,
            adapt_rho: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("tol_abs", self.tol_abs),
            ("tol_rel", self.tol_rel),
            ("gap_tol", self.gap_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be ≥ 1".into()));
        }
        if self.check_every == 0 {
            return Err(Error::InvalidArgument("check_every must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Objective after every iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Best primal–dual gap certified during the solve.
    pub certified_gap: Option<f64>,
    /// Final ADMM penalty (initial value for the other solvers).
    pub rho: f64,
    /// Whether the returned point came from the Newton refinement.
    pub polished: bool,
    /// Dual point associated with the returned solution (loss-block
    /// multiplier for ADMM, residual `y − ŷ` otherwise).
    pub dual_vector: Option<Vec<f64>>,
    pub wall_ms: f64,
}

impl SolverDiagnostics {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("diagnostics serialize")
    }
}

/// Euclidean projection onto `{z : A z ≥ 0}`.
///
/// The polar cone is `{−Aᵀλ : λ ≥ 0}`, so by Moreau decomposition the
/// projection is `x + Aᵀλ*` with `λ* = argmin_{λ≥0} ‖x + Aᵀλ‖`, an NNLS
/// problem.
pub fn cone_project(x: &[f64], a: &Matrix) -> Result<Vec<f64>> {
    if a.cols() != x.len() {
        return Err(Error::Shape(format!(
            "cone matrix has {} columns for a vector of length {}",
            a.cols(),
            x.len()
        )));
    }
    ConeProjector::new(a).project(x)
}

/// [`cone_project`] with `−Aᵀ` precomputed.
#[derive(Clone, Debug)]
pub(crate) struct ConeProjector {
    a: Matrix,
    neg_at: Matrix,
}

impl ConeProjector {
    pub(crate) fn new(a: &Matrix) -> Self {
        ConeProjector {
            a: a.clone(),
            neg_at: a.transpose().scaled(-1.0),
        }
    }

    pub(crate) fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub(crate) fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.iter().all(|&t| t == 0.0) || self.a.rows() == 0 {
            return Ok(x.to_vec());
        }
        if self.a.matvec(x).iter().all(|&t| t >= 0.0) {
            return Ok(x.to_vec());
        }
        let lambda = nnls(&self.neg_at, x)?;
        let shift = self.neg_at.matvec(&lambda);
        Ok(x.iter().zip(shift).map(|(xi, s)| xi - s).collect())
    }
}

/// `max(0, 1 − τ/‖v‖) · v`. Panics if `tau < 0`.
pub fn group_soft_threshold(v: &[f64], tau: f64) -> Vec<f64> {
    assert!(tau >= 0.0, "group_soft_threshold needs tau ≥ 0, got {tau}");
    let n = norm2(v);
    if n <= tau {
        return vec![0.0; v.len()];
    }
    let s = 1.0 - tau / n;
    v.iter().map(|t| t * s).collect()
}

/// Singular value thresholding `U max(Σ − τ, 0) Vᵀ`, the prox of
/// `τ‖·‖_*`.
pub fn svt(z: &Matrix, tau: f64) -> Result<Matrix> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be ≥ 0, got {tau}")));
    }
    if z.is_empty() {
        return Ok(z.clone());
    }
    let s = svd(z)?;
    let shrunk: Vec<f64> = s.singular_values.iter().map(|&x| (x - tau).max(0.0)).collect();
    let k = shrunk.len();
    Ok(Matrix::from_fn(z.rows(), z.cols(), |i, j| {
        (0..k).map(|l| s.u[(i, l)] * shrunk[l] * s.v[(j, l)]).sum()
    }))
}

pub(crate) fn elapsed_ms(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 5.0), vec![0.0, 0.0]);
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 0.0), vec![3.0, 4.0]);
        assert_eq!(group_soft_threshold(&[6.0, 8.0], 5.0), vec![3.0, 4.0]);
    }

    #[test]
    fn orthant_projection() {
        let a = Matrix::identity(2);
        assert_eq!(cone_project(&[1.0, -2.0], &a).unwrap(), vec![1.0, 0.0]);
        assert_eq!(cone_project(&[1.0, 2.0], &a).unwrap(), vec![1.0, 2.0]);
        assert!(cone_project(&[1.0], &a).is_err());
    }

    #[test]
    fn svt_examples() {
        let z = Matrix::from_rows(&[[3.0, 0.0], [0.0, 1.0]]).unwrap();
        let out = svt(&z, 2.0).unwrap();
        let want = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(out.sub(&want).unwrap().max_abs() < 1e-14);
        assert!(svt(&z, 0.0).unwrap().sub(&z).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            max_iter: 0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let parsed: SolverConfig = serde_json::from_str(r#"{"rho": 2.0}"#).unwrap();
        assert_eq!(parsed.rho, 2.0);
        assert_eq!(parsed.max_iter, 20_000);
    }
}

/// Orthonormal basis of `{u : a_j u = 0, j ∈ act}` as columns.
pub(crate) fn face_basis(a: &Matrix, act: &[usize], d: usize) -> Result<Matrix> {
    if act.is_empty() {
        return Ok(Matrix::identity(d));
    }
    let rows = a.select_rows(act);
    let s = svd(&rows.gram())?;
    let smax = s.singular_values[0];
    let keep: Vec<usize> = (0..d).filter(|&k| s.singular_values[k] <= 1e-12 * smax).collect();
    Ok(Matrix::from_fn(d, keep.len(), |i, k| s.v[(i, keep[k])]))
}
