//! Dense and Krylov linear algebra used by the preconditioners.

mod eig;
mod lanczos;
mod linear_map;
mod matrix;
mod svd;

pub use eig::{sym_eig, sym_eig_dense, SymEig, Tridiagonal};
pub use lanczos::{lanczos, tridiag_func_apply, LanczosBasis, BREAKDOWN_TOL};
pub use linear_map::{adjoint_mismatch, LinearMap, SymmetricFn};
pub use matrix::{add, axpy, dot, norm, norm_inf, orthonormalize_columns, scale, sub, Matrix};
pub use svd::{default_trunc_tol, thin_svd, SvdFactors};
