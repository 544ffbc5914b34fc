//! Lanczos tridiagonalization with full reorthogonalization and Krylov
//! matrix-function application.

use super::eig::{sym_eig, Tridiagonal};
use super::linear_map::LinearMap;
use super::matrix::{axpy, dot, norm, Matrix};
use crate::error::{Error, Result};

/// Relative size of `beta_j` (against the running operator-norm estimate)
/// below which the Krylov space is treated as invariant.
pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Orthonormal Krylov basis `Q` (`m x k_eff`) and the projected tridiagonal
/// `T = QᵀAQ`.
#[derive(Clone, Debug)]
pub struct LanczosBasis {
    pub q: Matrix,
    pub tri: Tridiagonal,
    pub k_eff: usize,
    /// Set when an invariant subspace was found before `k` steps. The
    /// projected problem is then exact.
    pub breakdown: bool,
}

/// Runs `k` Lanczos steps on the symmetric operator `op` from start vector
/// `g`. The basis is capped at the operator dimension.
pub fn lanczos(op: &dyn LinearMap, g: &[f64], k: usize) -> Result<LanczosBasis> {
    let m = op.in_dim();
    if op.out_dim() != m {
        return Err(Error::input("lanczos: operator must be square"));
    }
    if g.len() != m {
        return Err(Error::input(format!(
            "lanczos: start vector has length {}, operator dimension is {m}",
            g.len()
        )));
    }
    if k == 0 {
        return Err(Error::input("lanczos: k must be >= 1"));
    }
    let g_norm = norm(g);
    if g_norm == 0.0 || !g_norm.is_finite() {
        return Err(Error::input(
            "lanczos: start vector must be nonzero and finite",
        ));
    }
    let steps = k.min(m);

    let mut basis: Vec<Vec<f64>> = vec![g.iter().map(|x| x / g_norm).collect()];
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut op_scale = 0.0f64;
    let mut breakdown = false;

    for j in 0..steps {
        let qj = &basis[j];
        let mut w = op.apply(qj);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical(format!(
                "lanczos: operator produced non-finite values at step {j}"
            )));
        }
        let alpha = dot(qj, &w);
        axpy(-alpha, qj, &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &basis[j - 1], &mut w);
        }
        // full reorthogonalization, two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let h = dot(q, &w);
                axpy(-h, q, &mut w);
            }
        }
        alphas.push(alpha);
        op_scale = op_scale.max(alpha.abs());
        if j + 1 == steps {
            break;
        }
        let beta = norm(&w);
        if beta <= BREAKDOWN_TOL * op_scale.max(beta_scale(&betas)) {
            breakdown = true;
            break;
        }
        betas.push(beta);
        op_scale = op_scale.max(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }

    let k_eff = alphas.len();
    Ok(LanczosBasis {
        q: Matrix::from_columns(m, &basis[..k_eff]),
        tri: Tridiagonal::new(alphas, betas)?,
        k_eff,
        breakdown,
    })
}

fn beta_scale(betas: &[f64]) -> f64 {
    betas.iter().fold(0.0, |m, b| m.max(*b))
}

/// Computes `g_norm · Q · f(T) · e₁` through the eigendecomposition of `T`.
pub fn tridiag_func_apply(
    basis: &LanczosBasis,
    g_norm: f64,
    f: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let eig = sym_eig(&basis.tri)?;
    let k = basis.k_eff;
    // coefficients c = V diag(f(λ)) Vᵀ e₁
    let mut coeffs = vec![0.0; k];
    for (i, &lambda) in eig.values.iter().enumerate() {
        let fl = f(lambda);
        if !fl.is_finite() {
            return Err(Error::numerical(format!(
                "matrix function is not finite at eigenvalue {lambda:e}"
            )));
        }
        let w = fl * eig.vectors[(0, i)];
        for (r, c) in coeffs.iter_mut().enumerate() {
            *c += eig.vectors[(r, i)] * w;
        }
    }
    let mut out = basis.q.matvec(&coeffs);
    out.iter_mut().for_each(|x| *x *= g_norm);
    Ok(out)
}
