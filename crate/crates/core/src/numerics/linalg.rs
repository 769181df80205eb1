use super::{Mat, NumericsError, Real};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Mat<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &Mat<T>) -> Result<Self, NumericsError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(NumericsError::shape("square matrix", format!("{:?}", a.shape())));
        }
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(NumericsError::Singular);
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Cholesky { l })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn solve<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>, NumericsError> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(NumericsError::shape(
            format!("square system of size {n}"),
            format!("{:?} with rhs {}", a.shape(), b.len()),
        ));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = a.max_abs().max(T::min_positive_value());
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).unwrap())
            .unwrap();
        if m[(piv, col)].abs() <= T::epsilon() * scale * T::lit(n as f64) {
            return Err(NumericsError::Singular);
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(col, piv);
        }
        for i in col + 1..n {
            let f = m[(i, col)] / m[(col, col)];
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                let v = m[(col, j)];
                m[(i, j)] -= f * v;
            }
            let v = x[col];
            x[i] -= f * v;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Ok(x)
}

/// Basic least-squares solution of `min ‖A x − b‖₂` via Householder QR.
///
/// Columns that are numerically dependent on earlier ones get a zero
/// coefficient.
pub fn lstsq<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>, NumericsError> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(NumericsError::shape(format!("rhs of length {m}"), format!("{}", b.len())));
    }
    // column-major working copy
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut rhs = b.to_vec();
    let scale = a.max_abs();
    let tiny = T::epsilon() * T::lit((m.max(n) * 10) as f64) * scale;
    let mut pivot_row = 0;
    let mut basic: Vec<Option<usize>> = vec![None; n];
    for j in 0..n {
        if pivot_row >= m {
            break;
        }
        let norm = super::vector::norm2(&cols[j][pivot_row..]);
        if norm <= tiny {
            continue;
        }
        let alpha = if cols[j][pivot_row] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = cols[j][pivot_row..].to_vec();
        v[0] -= alpha;
        let vnorm2: T = super::vector::norm_sq(&v);
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for c in cols.iter_mut().skip(j) {
                let s: T = v.iter().zip(&c[pivot_row..]).map(|(&x, &y)| x * y).sum();
                let f = two * s / vnorm2;
                for (ci, &vi) in c[pivot_row..].iter_mut().zip(&v) {
                    *ci -= f * vi;
                }
            }
            let s: T = v.iter().zip(&rhs[pivot_row..]).map(|(&x, &y)| x * y).sum();
            let f = two * s / vnorm2;
            for (ri, &vi) in rhs[pivot_row..].iter_mut().zip(&v) {
                *ri -= f * vi;
            }
        }
        basic[j] = Some(pivot_row);
        pivot_row += 1;
    }
    // back substitution over the basic columns, right to left
    let mut x = vec![T::zero(); n];
    for j in (0..n).rev() {
        if let Some(r) = basic[j] {
            let mut s = rhs[r];
            for k in j + 1..n {
                if basic[k].is_some() {
                    s -= cols[k][r] * x[k];
                }
            }
            x[j] = s / cols[j][r];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Mat::from_rows(&[[4.0, 1.0], [1.0, 3.0]]).unwrap();
        let x = Cholesky::factor(&a).unwrap().solve(&[1.0, 2.0]);
        assert!((4.0 * x[0] + x[1] - 1.0_f64).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0_f64).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert_eq!(Cholesky::<f64>::factor(&a).unwrap_err(), NumericsError::Singular);
    }

    #[test]
    fn lu_solve_pivots() {
        let a = Mat::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        let x = solve(&a, &[3.0, 4.0]).unwrap();
        assert_eq!(x, vec![2.0, 3.0]);
    }

    #[test]
    fn lstsq_overdetermined_and_dependent() {
        // fit y = 1 + 2t through exact points
        let a = Mat::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]).unwrap();
        let x = lstsq(&a, &[1.0, 3.0, 5.0]).unwrap();
        assert!((x[0] - 1.0_f64).abs() < 1e-12 && (x[1] - 2.0_f64).abs() < 1e-12);

        let dep = Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        let x = lstsq(&dep, &[1.0, 2.0]).unwrap();
        assert!((x[0] - 1.0_f64).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
    }
}
