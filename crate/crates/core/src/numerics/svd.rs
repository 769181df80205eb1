use super::vector::{dot, norm2};
use super::{Mat, NumericsError, Real};

/// Relative threshold `σ_i > RANK_TOL · σ_max` for counting rank.
pub const RANK_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(σ) Vᵀ` with `k = min(m, n)` columns.
#[derive(Clone, Debug)]
pub struct SvdResult<T> {
    pub u: Mat<T>,
    pub singular_values: Vec<T>,
    pub v: Mat<T>,
}

impl<T: Real> SvdResult<T> {
    pub fn rank(&self, rel_tol: T) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or_else(T::zero);
        if smax == T::zero() {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * smax)
            .count()
    }

    pub fn reconstruct(&self) -> Mat<T> {
        let (m, k) = self.u.shape();
        let n = self.v.rows();
        Mat::from_fn(m, n, |i, j| {
            (0..k)
                .map(|l| self.u[(i, l)] * self.singular_values[l] * self.v[(j, l)])
                .sum()
        })
    }
}

/// One-sided Jacobi SVD.
pub fn svd<T: Real>(a: &Mat<T>) -> Result<SvdResult<T>, NumericsError> {
    if a.is_empty() {
        return Err(NumericsError::Empty);
    }
    if let Some(k) = a.as_slice().iter().position(|x| !x.is_finite()) {
        return Err(NumericsError::NonFinite {
            row: k / a.cols(),
            col: k % a.cols(),
        });
    }
    if a.rows() < a.cols() {
        let t = svd_tall(&a.transpose());
        return Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    Ok(svd_tall(a))
}

fn svd_tall<T: Real>(a: &Mat<T>) -> SvdResult<T> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<T>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let eps = T::epsilon() * T::lit(m as f64);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<T> = cols.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());
    let smax = sigma[order[0]];

    let mut ucols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut vsorted: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut ssorted = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for &j in &order {
        let s = sigma[j];
        if s > T::epsilon() * smax && s > T::zero() {
            ucols.push(cols[j].iter().map(|&x| x / s).collect());
        } else {
            deficient.push(ucols.len());
            ucols.push(vec![T::zero(); m]);
            sigma[j] = T::zero();
        }
        vsorted.push(vcols[j].clone());
        ssorted.push(sigma[j]);
    }
    for slot in deficient {
        ucols[slot] = orthonormal_complement(&ucols, slot, m);
    }

    let u = Mat::from_fn(m, n, |i, j| ucols[j][i]);
    let v = Mat::from_fn(n, n, |i, j| vsorted[j][i]);
    SvdResult {
        u,
        singular_values: ssorted,
        v,
    }
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// A unit vector orthogonal to every populated column except `slot`.
fn orthonormal_complement<T: Real>(cols: &[Vec<T>], slot: usize, m: usize) -> Vec<T> {
    for e in 0..m {
        let mut v: Vec<T> = (0..m).map(|i| if i == e { T::one() } else { T::zero() }).collect();
        for _ in 0..2 {
            for (k, c) in cols.iter().enumerate() {
                if k == slot || c.iter().all(|&x| x == T::zero()) {
                    continue;
                }
                let proj = dot(&v, c);
                for (vi, &ci) in v.iter_mut().zip(c) {
                    *vi -= proj * ci;
                }
            }
        }
        let nv = norm2(&v);
        if nv > T::lit(0.5) {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
    vec![T::zero(); m]
}

/// Largest singular value by power iteration on `AᵀA`.
///
/// Stops once successive estimates agree to relative `tol`.
pub fn power_sigma_max<T: Real>(a: &Mat<T>, tol: T, max_iter: usize) -> Result<T, NumericsError> {
    if a.is_empty() {
        return Err(NumericsError::Empty);
    }
    if a.max_abs() == T::zero() {
        return Ok(T::zero());
    }
    let n = a.cols();
    let mut x: Vec<T> = (0..n)
        .map(|j| T::one() + T::lit(0.37) * T::lit((j as f64 * 1.3).sin()))
        .collect();
    if norm2(&a.matvec(&x)) == T::zero() {
        // start happened to lie in the null space; use the row of largest norm
        let norms = a.row_norms();
        let best = (0..a.rows())
            .max_by(|&i, &j| norms[i].partial_cmp(&norms[j]).unwrap())
            .unwrap();
        x = a.row(best).to_vec();
    }
    let mut prev = T::zero();
    let mut sigma = T::zero();
    for it in 0..max_iter {
        let nx = norm2(&x);
        for xi in x.iter_mut() {
            *xi /= nx;
        }
        let ax = a.matvec(&x);
        sigma = norm2(&ax);
        if it > 0 && (sigma - prev).abs() <= tol * sigma {
            return Ok(sigma);
        }
        prev = sigma;
        x = a.tmatvec(&ax);
        if norm2(&x) == T::zero() {
            return Ok(sigma);
        }
    }
    Err(NumericsError::NoConvergence {
        routine: "power_sigma_max",
        iterations: max_iter,
        last: sigma.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal() {
        let r = svd(&Mat::<f64>::identity(2)).unwrap();
        assert_eq!(r.singular_values, vec![1.0, 1.0]);

        let d = Mat::from_rows(&[[3.0, 0.0], [0.0, 0.0]]).unwrap();
        let r = svd(&d).unwrap();
        assert!((r.singular_values[0] - 3.0_f64).abs() < 1e-14);
        assert_eq!(r.singular_values[1], 0.0);
        assert_eq!(r.rank(RANK_TOL), 1);
        // completed left factor stays orthonormal
        let utu = r.u.transpose().matmul(&r.u).unwrap();
        assert!(utu.sub(&Mat::identity(2)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn wide_matrix_goes_through_transpose() {
        let a = Mat::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let r = svd(&a).unwrap();
        assert_eq!(r.u.shape(), (2, 2));
        assert_eq!(r.v.shape(), (3, 2));
        let err = r.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(err < 1e-13);
    }

    #[test]
    fn rejects_non_finite() {
        let a = Mat::from_fn(2, 2, |i, j| if i == 1 && j == 0 { f64::NAN } else { 1.0 });
        assert_eq!(svd(&a).unwrap_err(), NumericsError::NonFinite { row: 1, col: 0 });
    }

    #[test]
    fn power_iteration_basics() {
        let d = Mat::from_rows(&[[3.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((power_sigma_max(&d, 1e-14, 1000).unwrap() - 3.0_f64).abs() < 1e-8);
        assert_eq!(power_sigma_max(&Mat::<f64>::zeros(3, 2), 1e-12, 10).unwrap(), 0.0);
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        let d = Mat::from_rows(&[[1.0, 0.0], [0.0, 0.999]]).unwrap();
        match power_sigma_max(&d, 1e-16, 3) {
            Err(NumericsError::NoConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 3);
                assert!(last > 0.99);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
