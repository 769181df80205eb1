//! Lawson–Hanson active-set nonnegative least squares.

use super::linalg::lstsq;
use super::{Mat, NumericsError, Real};

#[derive(Clone, Copy, Debug)]
pub struct NnlsOptions<T> {
    /// Cap on inner (step-back) iterations; defaults to `3n + 30`.
    pub max_iter: Option<usize>,
    /// Dual-feasibility threshold; defaults to a multiple of machine epsilon.
    pub tol: Option<T>,
}

impl<T> Default for NnlsOptions<T> {
    fn default() -> Self {
        NnlsOptions {
            max_iter: None,
            tol: None,
        }
    }
}

/// Solves `min ‖A x − b‖₂ s.t. x ≥ 0`.
pub fn nnls<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>, NumericsError> {
    nnls_with(a, b, NnlsOptions::default())
}

pub fn nnls_with<T: Real>(
    a: &Mat<T>,
    b: &[T],
    opts: NnlsOptions<T>,
) -> Result<Vec<T>, NumericsError> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(NumericsError::shape(format!("rhs of length {m}"), format!("{}", b.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let max_iter = opts.max_iter.unwrap_or(3 * n + 30);
    let bnorm = super::vector::norm2(b);
    let tol = opts.tol.unwrap_or_else(|| {
        T::lit(10.0) * T::epsilon() * a.max_abs() * T::lit(m.max(n) as f64) * bnorm.max(T::one())
    });

    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let mut blocked = vec![false; n];
    let mut iterations = 0;
    let mut res = bnorm;

    loop {
        let w = gradient_dual(a, b, &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = candidate else { break };
        let saved = (x.clone(), passive.clone());
        passive[j] = true;

        let mut s = solve_passive(a, b, &passive)?;
        if s[j] <= T::zero() {
            // column j is numerically dependent on the passive set
            passive[j] = false;
            blocked[j] = true;
            continue;
        }
        while (0..n).any(|i| passive[i] && s[i] <= T::zero()) {
            iterations += 1;
            if iterations > max_iter {
                return Err(NumericsError::NoConvergence {
                    routine: "nnls",
                    iterations,
                    last: residual_norm(a, b, &x).as_f64(),
                });
            }
            let mut alpha = T::infinity();
            for i in 0..n {
                if passive[i] && s[i] <= T::zero() {
                    let denom = x[i] - s[i];
                    let t = if denom > T::zero() { x[i] / denom } else { T::zero() };
                    alpha = alpha.min(t);
                }
            }
            for i in 0..n {
                if passive[i] {
                    let xi = x[i];
                    x[i] = xi + alpha * (s[i] - xi);
                }
            }
            for i in 0..n {
                if passive[i] && (x[i] <= tol || (s[i] <= T::zero() && x[i] <= T::epsilon())) {
                    passive[i] = false;
                    x[i] = T::zero();
                }
            }
            s = solve_passive(a, b, &passive)?;
        }
        let new_res = residual_norm(a, b, &s);
        if new_res < res {
            x = s;
            res = new_res;
            blocked.iter_mut().for_each(|f| *f = false);
        } else {
            // no progress at rounding level, so adding j cannot help
            (x, passive) = saved;
            blocked[j] = true;
        }
        iterations += 1;
        if iterations > max_iter {
            return Err(NumericsError::NoConvergence {
                routine: "nnls",
                iterations,
                last: residual_norm(a, b, &x).as_f64(),
            });
        }
    }
    Ok(x)
}

fn gradient_dual<T: Real>(a: &Mat<T>, b: &[T], x: &[T]) -> Vec<T> {
    let ax = a.matvec(x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &v)| bi - v).collect();
    a.tmatvec(&r)
}

fn residual_norm<T: Real>(a: &Mat<T>, b: &[T], x: &[T]) -> T {
    let ax = a.matvec(x);
    super::vector::dist(&ax, b)
}

fn solve_passive<T: Real>(a: &Mat<T>, b: &[T], passive: &[bool]) -> Result<Vec<T>, NumericsError> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let mut out = vec![T::zero(); passive.len()];
    if idx.is_empty() {
        return Ok(out);
    }
    let sub = Mat::from_fn(a.rows(), idx.len(), |i, k| a[(i, idx[k])]);
    let z = lstsq(&sub, b)?;
    for (k, &j) in idx.iter().enumerate() {
        out[j] = z[k];
    }
    Ok(out)
}

/// Largest KKT violation of a candidate NNLS solution:
/// `max(|∇_j| on x_j > 0, max(0, −∇_j) on x_j = 0, max(0, −x_j))`.
pub fn nnls_kkt_residual<T: Real>(a: &Mat<T>, b: &[T], x: &[T]) -> T {
    let w = gradient_dual(a, b, x);
    let mut worst = T::zero();
    for (j, &xj) in x.iter().enumerate() {
        let g = -w[j];
        let v = if xj > T::zero() { g.abs() } else { (-g).max(T::zero()) };
        worst = worst.max(v).max(-xj);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthant_clipping() {
        let i2 = Mat::<f64>::identity(2);
        assert_eq!(nnls(&i2, &[1.0, -2.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(nnls(&i2, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn wide_dependent_columns() {
        // more columns than rows, with a repeated column
        let a = Mat::from_rows(&[[1.0, 1.0, 0.0, -1.0], [0.0, 0.0, 1.0, 1.0]]).unwrap();
        let b = [2.0, 1.0];
        let x = nnls(&a, &b).unwrap();
        assert!(nnls_kkt_residual(&a, &b, &x) < 1e-12);
        let r = residual_norm(&a, &b, &x);
        assert!(r < 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(nnls(&a, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let a = Mat::from_rows(&[[1.0, 0.2, 0.1], [0.1, 1.0, 0.3], [0.0, 0.1, 1.0]]).unwrap();
        let res = nnls_with(
            &a,
            &[1.0, 1.0, 1.0],
            NnlsOptions {
                max_iter: Some(0),
                tol: None,
            },
        );
        assert!(matches!(res, Err(NumericsError::NoConvergence { routine: "nnls", .. })));
    }
}
