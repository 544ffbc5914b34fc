//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Rank-truncated thin SVD `A ≈ U diag(sigma) Vᵀ`.
///
/// Only the `rank` retained triplets are stored: `u` is `n x rank`, `v` is
/// `m x rank`, and `sigma` is descending with every entry above
/// `trunc_tol * sigma_max`.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
    pub rank: usize,
    pub trunc_tol: f64,
}

impl SvdFactors {
    pub fn sigma_max(&self) -> Option<f64> {
        self.sigma.first().copied()
    }

    /// Smallest retained singular value.
    pub fn sigma_min(&self) -> Option<f64> {
        self.sigma.last().copied()
    }

    pub fn reconstruct(&self) -> Matrix {
        self.u
            .scale_columns(&self.sigma)
            .matmul(&self.v.transpose())
    }
}

/// Default truncation threshold `max(n, m) * machine epsilon`.
pub fn default_trunc_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Computes the economy SVD of `a`, dropping singular values
/// `<= trunc_tol * sigma_max`.
pub fn thin_svd(a: &Matrix, trunc_tol: f64) -> Result<SvdFactors> {
    if !a.is_finite() {
        return Err(Error::input("thin_svd: matrix has non-finite entries"));
    }
    if !(trunc_tol >= 0.0) {
        return Err(Error::input(format!(
            "thin_svd: trunc_tol must be >= 0, got {trunc_tol}"
        )));
    }
    if a.rows() >= a.cols() {
        let (u, sigma, v) = jacobi_tall(a)?;
        Ok(truncate(u, sigma, v, trunc_tol))
    } else {
        // A = (Aᵀ)ᵀ = (U' S V'ᵀ)ᵀ = V' S U'ᵀ
        let (u_t, sigma, v_t) = jacobi_tall(&a.transpose())?;
        Ok(truncate(v_t, sigma, u_t, trunc_tol))
    }
}

/// One-sided Jacobi on a tall matrix (`n >= m`). Returns full-width factors
/// (`m` triplets) sorted by descending singular value.
fn jacobi_tall(a: &Matrix) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.rows();
    let m = a.cols();
    // column storage for cache-friendly rotations
    let mut w: Vec<Vec<f64>> = (0..m).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    let tol = (n.max(1) as f64) * f64::EPSILON;

    let mut converged = m < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..m {
            for j in (i + 1)..m {
                let alpha = dot(&w[i], &w[i]);
                let beta = dot(&w[j], &w[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&w[i], &w[j]);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::numerical(format!(
            "thin_svd: Jacobi iteration did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let sigma: Vec<f64> = w.iter().map(|c| super::matrix::norm(c)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    let sigma_sorted: Vec<f64> = order.iter().map(|&k| sigma[k]).collect();
    let u: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let s = sigma[k];
            if s > 0.0 {
                w[k].iter().map(|x| x / s).collect()
            } else {
                vec![0.0; n]
            }
        })
        .collect();
    let v_sorted: Vec<Vec<f64>> = order.iter().map(|&k| v[k].clone()).collect();
    Ok((u, sigma_sorted, v_sorted))
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let ci = &mut left[i];
    let cj = &mut right[0];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

fn truncate(u: Vec<Vec<f64>>, sigma: Vec<f64>, v: Vec<Vec<f64>>, trunc_tol: f64) -> SvdFactors {
    let n = u.first().map_or(0, Vec::len);
    let m = v.first().map_or(0, Vec::len);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cutoff = trunc_tol * smax;
    let rank = sigma.iter().take_while(|&&s| s > cutoff && s > 0.0).count();
    SvdFactors {
        u: Matrix::from_columns(n, &u[..rank]),
        sigma: sigma[..rank].to_vec(),
        v: Matrix::from_columns(m, &v[..rank]),
        rank,
        trunc_tol,
    }
}
