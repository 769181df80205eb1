//! Unnormalized forward DFT (`X_k = Σ_l x_l e^{−2πi kl/d}`) with a `1/d` inverse.

use num_complex::Complex;

use super::{Mat, NumericsError, Real};

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMat<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::shape(
                format!("{} entries", rows * cols),
                format!("{}", data.len()),
            ));
        }
        if let Some(k) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(NumericsError::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn from_real(a: &Mat<T>) -> Self {
        CMat {
            rows: a.rows(),
            cols: a.cols(),
            data: a.as_slice().iter().map(|&x| Complex::new(x, T::zero())).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scaled(&self, s: T) -> Self {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `A z`
    pub fn matvec(&self, z: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(z.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(z).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `Aᴴ r`
    pub fn adjoint_matvec(&self, r: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(r.len(), self.rows);
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.cols];
        for (i, &ri) in r.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * ri;
            }
        }
        out
    }

    /// Real embedding `[[Re, −Im], [Im, Re]]` acting on `(Re z, Im z)`.
    pub fn real_embedding(&self) -> Mat<T> {
        let (m, n) = (self.rows, self.cols);
        Mat::from_fn(2 * m, 2 * n, |i, j| {
            let a = self.get(i % m, j % n);
            match (i < m, j < n) {
                (true, true) | (false, false) => a.re,
                (true, false) => -a.im,
                (false, true) => a.im,
            }
        })
    }
}

pub fn dft<T: Real>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    transform(x, false)
}

/// Inverse transform including the `1/d` factor.
pub fn idft<T: Real>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    let d = T::lit(x.len() as f64);
    transform(x, true).into_iter().map(|z| z / d).collect()
}

fn transform<T: Real>(x: &[Complex<T>], inverse: bool) -> Vec<Complex<T>> {
    let n = x.len();
    if n <= 1 {
        return x.to_vec();
    }
    if n.is_power_of_two() {
        let mut buf = x.to_vec();
        fft_radix2(&mut buf, inverse);
        buf
    } else {
        naive(x, inverse)
    }
}

fn naive<T: Real>(x: &[Complex<T>], inverse: bool) -> Vec<Complex<T>> {
    let n = x.len();
    let sign = if inverse { T::one() } else { -T::one() };
    let base = sign * T::lit(2.0) * T::PI() / T::lit(n as f64);
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(l, &xl)| {
                    // reduce the exponent mod n before forming the angle
                    let ang = base * T::lit(((k * l) % n) as f64);
                    xl * Complex::new(ang.cos(), ang.sin())
                })
                .sum()
        })
        .collect()
}

fn fft_radix2<T: Real>(buf: &mut [Complex<T>], inverse: bool) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { T::one() } else { -T::one() };
    let mut len = 2;
    while len <= n {
        let ang = sign * T::lit(2.0) * T::PI() / T::lit(len as f64);
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = ang * T::lit(k as f64);
                let w = Complex::new(a.cos(), a.sin());
                let u = buf[start + k];
                let t = buf[start + k + half] * w;
                buf[start + k] = u + t;
                buf[start + k + half] = u - t;
            }
        }
        len <<= 1;
    }
}

/// Row-wise DFT, i.e. `X F` for the DFT matrix `F_{lk} = e^{−2πi lk/d}`.
pub fn dft_matrix_apply<T: Real>(x: &Mat<T>) -> CMat<T> {
    let (n, d) = x.shape();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let row: Vec<Complex<T>> = x.row(i).iter().map(|&v| Complex::new(v, T::zero())).collect();
        data.extend(dft(&row));
    }
    CMat { rows: n, cols: d, data }
}

/// Row-wise inverse DFT.
pub fn idft_rows<T: Real>(x: &CMat<T>) -> CMat<T> {
    let mut data = Vec::with_capacity(x.rows * x.cols);
    for i in 0..x.rows {
        data.extend(idft(x.row(i)));
    }
    CMat {
        rows: x.rows,
        cols: x.cols,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn impulse_and_constant() {
        let out = dft(&[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert!(out.iter().all(|z| (z - c(1.0)).norm() < 1e-15));
        let out = dft(&[c(1.0); 4]);
        assert!((out[0] - c(4.0)).norm() < 1e-15);
        assert!(out[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn radix2_matches_naive_and_inverts() {
        for &n in &[2usize, 3, 5, 8, 12, 16] {
            let x: Vec<Complex<f64>> = (0..n)
                .map(|i| Complex::new((i as f64 * 0.9).sin(), (i as f64 * 0.4).cos()))
                .collect();
            let fast = dft(&x);
            let slow = naive(&x, false);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12);
            }
            let back = idft(&fast);
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn real_embedding_matches_complex_product() {
        let a = CMat::<f64>::new(1, 2, vec![Complex::new(1.0, 2.0), Complex::new(-0.5, 0.25)]).unwrap();
        let z = [Complex::new(0.3, -0.7), Complex::new(1.1, 0.4)];
        let direct = a.matvec(&z);
        let e = a.real_embedding();
        let out: Vec<f64> = e.matvec(&[z[0].re, z[1].re, z[0].im, z[1].im]);
        assert!((out[0] - direct[0].re).abs() < 1e-14);
        assert!((out[1] - direct[0].im).abs() < 1e-14);
    }
}
