//! Symmetric eigensolvers: Sturm bisection and inverse iteration for
//! tridiagonal matrices, thick-restart Lanczos for sparse operators.

mod lanczos;
mod tridiag;

pub use lanczos::{lanczos_smallest, FnOperator, LanczosOptions, LanczosResult, LinearOperator};
pub use tridiag::{inverse_iteration, sturm_smallest, InverseIteration, TridiagonalSym};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigsError {
    #[error("operator failed the symmetry probe: |<Au,v> - <u,Av>| = {defect:e} exceeds {threshold:e}")]
    NotSymmetric { defect: f64, threshold: f64 },
    #[error("inverse iteration did not converge after {iterations} iterations (residual {residual:e}, tol {tol:e})")]
    InverseIterationFailed { iterations: usize, residual: f64, tol: f64 },
    #[error("shifted tridiagonal system stayed singular after {retries} shift perturbations")]
    Singular { retries: usize },
    #[error("Sturm bisection needs a non-periodic tridiagonal matrix; use the Lanczos path")]
    Periodic,
    #[error("invalid eigensolver request: {0}")]
    InvalidRequest(String),
    #[error("Lanczos did not converge in {iterations} steps: worst residual {residual:e} > tol {tol:e}")]
    NotConverged { iterations: usize, residual: f64, tol: f64 },
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
