use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{elapsed_ms, svt, SolverConfig, SolverDiagnostics};
use crate::cnn::PatchSet;
use crate::numerics::vector::{dot, norm_sq};
use crate::numerics::{power_sigma_max, svd};
use crate::{Error, Matrix, Result};

/// Optimality summary of a nuclear-norm solution `Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuclearCheck {
    /// `σ_max([X_1ᵀv̂ … X_Kᵀv̂])` at `v̂ = y − Σ_k X_k z_k`.
    pub sigma_max: f64,
    pub primal: f64,
    /// `v̂ᵀy − ½‖v̂‖²` after scaling `v̂` to satisfy `σ_max ≤ β`.
    pub dual: f64,
    pub gap: f64,
}

fn nuclear_norm(z: &Matrix) -> Result<f64> {
    Ok(svd(z)?.singular_values.iter().sum())
}

/// Primal value, dual constraint and duality gap of `Z` for
/// `½‖Σ_k X_k z_k − y‖² + β‖Z‖_*`.
pub fn nuclear_dual_check(ps: &PatchSet, y: &[f64], beta: f64, z: &Matrix) -> Result<NuclearCheck> {
    let pred = ps.predict(z)?;
    let v: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let primal = 0.5 * norm_sq(&v) + beta * nuclear_norm(z)?;
    let sigma = svd(&ps.adjoint(&v)?)?.singular_values[0];
    let s = if sigma > beta { beta / sigma } else { 1.0 };
    let dual = s * dot(&v, y) - 0.5 * s * s * norm_sq(&v);
    Ok(NuclearCheck {
        sigma_max: sigma,
        primal,
        dual,
        gap: primal - dual,
    })
}

/// `min_Z ½‖Σ_k X_k z_k − y‖² + β‖Z‖_*` with `Z = [z_1 … z_K]` (`d × K`), by
/// proximal gradient with step `1/L`, `L = σ_max([X_1 … X_K])²`, singular
/// value thresholding as prox, and momentum with function-value restarts.
///
/// Converged once `σ_max([X_kᵀv̂]) ≤ β(1 + 1e-7)` and the duality gap is at
/// most `gap_tol · (1 + |primal|)`.
pub fn solve_nuclear(
    ps: &PatchSet,
    y: &[f64],
    beta: f64,
    cfg: &SolverConfig,
) -> Result<(Matrix, SolverDiagnostics)> {
    cfg.validate()?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be finite and ≥ 0, got {beta}")));
    }
    if y.len() != ps.n() {
        return Err(Error::Shape(format!("{} samples but {} targets", ps.n(), y.len())));
    }
    let start = Instant::now();
    let (d, k) = (ps.d(), ps.k());
    let mut diag = SolverDiagnostics {
        rho: cfg.rho,
        ..SolverDiagnostics::default()
    };
    let sigma = power_sigma_max(&ps.stacked(), 1e-12, 100_000)?;
    let lip = sigma * sigma * (1.0 + 1e-9);

    let value = |z: &Matrix| -> Result<f64> {
        let pred = ps.predict(z)?;
        Ok(0.5 * pred.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + beta * nuclear_norm(z)?)
    };
    let finished = |z: &Matrix| -> Result<(bool, NuclearCheck)> {
        let c = nuclear_dual_check(ps, y, beta, z)?;
        let ok = c.sigma_max <= beta * (1.0 + 1e-7) + cfg.tol_abs && c.gap <= cfg.gap_tol * (1.0 + c.primal.abs());
        Ok((ok, c))
    };

    let mut x = Matrix::zeros(d, k);
    let mut fx = value(&x)?;
    let (ok, check) = finished(&x)?;
    if ok || lip == 0.0 {
        diag.converged = ok;
        diag.certified_gap = Some(check.gap);
        diag.objective_trace.push(fx);
        diag.dual_vector = Some(y.to_vec());
        diag.wall_ms = elapsed_ms(start);
        return Ok((x, diag));
    }
    let mut yk = x.clone();
    let mut t = 1.0_f64;
    let mut last = check;
    for it in 1..=cfg.max_iter {
        let pred = ps.predict(&yk)?;
        let res: Vec<f64> = pred.iter().zip(y).map(|(a, b)| a - b).collect();
        let grad = ps.adjoint(&res)?;
        let step = yk.sub(&grad.scaled(1.0 / lip))?;
        let z = svt(&step, beta / lip)?;
        let fz = value(&z)?;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // a plain proximal step from x is accepted even if rounding makes it
        // look uphill, otherwise a restart could repeat forever
        if fz <= fx || t == 1.0 {
            let x_prev = std::mem::replace(&mut x, z);
            fx = fz;
            yk = x.add(&x.sub(&x_prev)?.scaled((t - 1.0) / t_next))?;
            t = t_next;
        } else {
            yk = x.clone();
            t = 1.0;
        }
        diag.objective_trace.push(fx);
        diag.iterations = it;
        if it % 10 == 0 || it == cfg.max_iter {
            let (ok, c) = finished(&x)?;
            diag.primal_residual = (c.sigma_max - beta).max(0.0);
            last = c;
            if ok {
                diag.converged = true;
                break;
            }
        }
    }
    let pred = ps.predict(&x)?;
    diag.dual_vector = Some(y.iter().zip(&pred).map(|(a, b)| a - b).collect());
    diag.certified_gap = Some(last.gap);
    diag.wall_ms = elapsed_ms(start);
    Ok((x, diag))
}
