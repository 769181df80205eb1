//! Dense linear algebra and transform primitives.
//!
//! Everything here is generic over [`Real`] so the same kernels run in `f32`
//! and `f64`. The optimization layers above use the `f64` aliases exported at
//! the crate root.

mod dft;
mod linalg;
mod matrix;
mod nnls;
mod svd;
pub mod vector;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign};
use thiserror::Error;

pub use dft::{dft, dft_matrix_apply, idft, idft_rows, CMat};
pub use linalg::{lstsq, solve, Cholesky};
pub use matrix::Mat;
pub use nnls::{nnls, nnls_with, nnls_kkt_residual, NnlsOptions};
pub use svd::{power_sigma_max, svd, SvdResult, RANK_TOL};

/// Floating point scalar usable by every kernel in this module.
pub trait Real:
    Float + FloatConst + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 literal fits the scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },
    #[error("empty input")]
    Empty,
    #[error("{routine} did not converge after {iterations} iterations (last estimate {last})")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
        last: f64,
    },
    #[error("matrix is singular or not positive definite")]
    Singular,
}

impl NumericsError {
    pub(crate) fn shape(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        NumericsError::Shape {
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
