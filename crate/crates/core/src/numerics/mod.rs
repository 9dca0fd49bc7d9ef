//! Numerical building blocks shared by every other module.
//!
//! All functions are pure; the FFT planner cache is thread-local.

mod matrix;
mod special;
mod transform;

pub use matrix::{
    condition_number, hermitian_eigenvalues, invert, pseudo_inverse, pseudo_inverse_with_limit,
    regularized_hermitian_solve, CMatrix, MAX_CONDITION,
};
pub use special::{bessel_j0, dirichlet_kernel};
pub use transform::{dft, dft_direct, dft_in_place, idft, idft_direct, idft_in_place};
