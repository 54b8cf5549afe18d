//! Special functions, reproducible sampling, and dense linear algebra shared
//! by all simulator modules. Everything here is pure given an explicit
//! [`RngStream`], so workers with distinct streams can run concurrently.

mod bessel;
pub mod linalg;
mod mat;
mod rng;

pub use bessel::bessel_j0;
pub use linalg::{
    cdot, hermitian_eigenvalues, nonneg_spectral_radius, norm_sqr, solve_hermitian, solve_real,
    CholeskyFactor, HermitianMatrix,
};
pub use mat::Mat;
pub use rng::{sample_complex_gaussian, stream_id, RngStream, StreamPurpose};
