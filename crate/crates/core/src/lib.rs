//! Global optimization of two-layer ReLU networks through their exact convex
//! reformulation.
//!
//! The pipeline is: enumerate (or sample) the activation patterns of the data
//! ([`arrangements`]), solve the cone-constrained group lasso over them
//! ([`solvers`]), certify the solution by duality ([`program`]), and read off
//! an optimal network ([`network`]). [`cnn`] holds the convolutional
//! reductions and [`baseline`] the nonconvex SGD trainer used for comparison.

pub mod arrangements;
pub mod baseline;
pub mod cnn;
pub mod network;
pub mod numerics;
pub mod program;
pub mod solvers;

use thiserror::Error;

pub use arrangements::{ActivationPattern, ArrangementError, ArrangementSet};
pub use network::TwoLayerReLUNet;
pub use program::{ConvexTrainingProblem, DualCertificate, GroupSolution, LossKind};
pub use solvers::{SolverConfig, SolverDiagnostics};

pub type Matrix = numerics::Mat<f64>;
pub type ComplexMatrix = numerics::CMat<f64>;
pub type Svd = numerics::SvdResult<f64>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("certificate is not valid: {0}")]
    InvalidCertificate(String),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Arrangement(#[from] ArrangementError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
