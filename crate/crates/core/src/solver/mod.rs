//! Linear solvers and extreme-eigenvalue estimates for sparse SPD matrices.

mod cg;
mod cholesky;
pub mod dense_reference;
mod eigen;

pub use cg::{cg_solve, CgOptions, SolveReport};
pub use cholesky::SkylineCholesky;
pub use eigen::{
    condition_estimate, lambda_max_lanczos, lambda_min_inverse_iteration, EigenEstimate,
    SpectralEstimate, SpectralOptions,
};

use crate::error::Result;
use crate::sparse::CsrMatrix;

/// Factor-and-solve in one call.
pub fn cholesky_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(SkylineCholesky::factor(a)?.solve(b))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
