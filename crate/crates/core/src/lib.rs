//! SVD-preconditioned gradient descent for nonlinear least squares
//! `f(θ) = ½‖F(θ)‖²`.
//!
//! The step `θ ← θ − α V Uᵀ F` uses the thin SVD `J = U Σ Vᵀ` of the
//! residual Jacobian. It equals `B ∇f` with `B = [(JᵀJ)†]^{1/2}`. For
//! larger models, [`precond`] applies damped versions of `B` matrix-free
//! by Lanczos, and [`optim`] wraps them in Adam and AMSGrad style updates.
//!
//! Modules, bottom up: [`linalg`] (dense kernels, SVD, Lanczos),
//! [`problems`] (residual maps with JVP/VJP), [`precond`], [`optim`],
//! [`diagnostics`] (rate fits, convergence identities) and [`harness`]
//! (configs, CSV/JSON reports, the `spgd` command line).

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod precond;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
