//! Random-matrix numerics for block correlation matrices of many stationary
//! time series: sample matrices and linear spectral statistics, the
//! Marchenko-Pastur law, the canonical equations of the deterministic
//! equivalent, Toeplitz operators, Szego polynomials and Monte-Carlo
//! experiments.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the experiments use.

pub mod detequiv;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod matfun;
pub mod mplaw;
pub mod sampling;
pub mod scalar;
pub mod szego;
pub mod toeplitz;
pub mod tsmodel;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Complex64 = num_complex::Complex<f64>;
pub type CMatrix = linalg::CMatrix<f64>;
pub type CovarianceModel = tsmodel::CovarianceModel<f64>;
pub type ModelBank = tsmodel::ModelBank<f64>;
pub type Ensemble = tsmodel::Ensemble<f64>;
pub type BlockHermitian = sampling::BlockHermitian<f64>;
pub type MarchenkoPastur = mplaw::MarchenkoPastur<f64>;
pub type ToeplitzSymbol = toeplitz::ToeplitzSymbol<f64>;
pub type SzegoChain = szego::SzegoChain<f64>;
pub type CanonicalSystem = detequiv::CanonicalSystem<f64>;
pub type StieltjesPair = detequiv::StieltjesPair<f64>;
pub type SolverOptions = detequiv::SolverOptions<f64>;
