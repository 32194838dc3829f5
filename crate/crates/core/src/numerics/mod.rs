//! Complex dense linear algebra and seeded Gaussian sampling.

mod eig;
mod matrix;
mod rng;
mod solve;

pub use eig::{eig_hermitian_desc, eigvals_hermitian_desc, gram_eigvals_desc, HermitianEig};
pub use matrix::CMatrix;
pub use rng::{fill_complex_gaussian, sample_complex_gaussian, splitmix64, SeedSpec};
pub use solve::{inverse_hermitian_pd, solve_hermitian_psd, Cholesky};

pub use num_complex::Complex64;
