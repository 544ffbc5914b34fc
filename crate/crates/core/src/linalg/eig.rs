//! Symmetric eigensolvers: implicit QL for tridiagonal matrices and cyclic
//! Jacobi for small dense ones.

use super::matrix::Matrix;
use crate::error::{Error, Result};

const MAX_QL_ITERS: usize = 60;
const MAX_JACOBI_SWEEPS: usize = 100;

/// Symmetric tridiagonal matrix with diagonal `alphas` and off-diagonal
/// `betas` (`betas.len() == alphas.len() - 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::input(
                "tridiagonal matrix must have at least one row",
            ));
        }
        if betas.len() + 1 != alphas.len() {
            return Err(Error::input(format!(
                "tridiagonal: {} diagonal entries need {} off-diagonal entries, got {}",
                alphas.len(),
                alphas.len() - 1,
                betas.len()
            )));
        }
        if betas.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::input(
                "tridiagonal: off-diagonal entries must be >= 0",
            ));
        }
        Ok(Tridiagonal { alphas, betas })
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let k = self.dim();
        let mut t = Matrix::from_diag(&self.alphas);
        for (i, &b) in self.betas.iter().enumerate() {
            t[(i, i + 1)] = b;
            t[(i + 1, i)] = b;
        }
        debug_assert_eq!(t.rows(), k);
        t
    }

    /// Infinity norm, used as the scale in residual checks.
    pub fn norm_inf(&self) -> f64 {
        let k = self.dim();
        (0..k)
            .map(|i| {
                let left = if i > 0 { self.betas[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < k { self.betas[i].abs() } else { 0.0 };
                left + self.alphas[i].abs() + right
            })
            .fold(0.0, f64::max)
    }
}

/// Eigenpairs of a symmetric matrix: ascending `values`, matching unit
/// eigenvectors in the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Eigendecomposition of a symmetric tridiagonal matrix by the implicit QL
/// method with Wilkinson shifts.
pub fn sym_eig(t: &Tridiagonal) -> Result<SymEig> {
    let n = t.dim();
    let mut d = t.alphas.clone();
    let mut e = t.betas.clone();
    e.push(0.0);
    if d.iter().chain(&e).any(|x| !x.is_finite()) {
        return Err(Error::input("sym_eig: non-finite tridiagonal entries"));
    }
    // z is stored row-major; column i is the i-th eigenvector
    let mut z = Matrix::identity(n);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERS {
                return Err(Error::numerical(format!(
                    "sym_eig: QL iteration exceeded {MAX_QL_ITERS} sweeps at index {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zk1 = z[(k, i + 1)];
                    let zk = z[(k, i)];
                    z[(k, i + 1)] = s * zk + c * zk1;
                    z[(k, i)] = c * zk - s * zk1;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(sorted(d, &z))
}

/// Eigendecomposition of a dense symmetric matrix by cyclic Jacobi
/// rotations. Only the upper triangle is read.
pub fn sym_eig_dense(a: &Matrix) -> Result<SymEig> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::input("sym_eig_dense: matrix is not square"));
    }
    if !a.is_finite() {
        return Err(Error::input("sym_eig_dense: non-finite entries"));
    }
    let mut m = a.clone();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return Ok(sorted(vec![0.0; n], &v));
    }

    for _ in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale {
            let values = (0..n).map(|i| m[(i, i)]).collect();
            return Ok(sorted(values, &v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::numerical(format!(
        "sym_eig_dense: Jacobi did not converge in {MAX_JACOBI_SWEEPS} sweeps"
    )))
}

fn sorted(values: Vec<f64>, vectors: &Matrix) -> SymEig {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = Matrix::zeros(vectors.rows(), n);
    for (dst, &src) in order.iter().enumerate() {
        out.set_column(dst, &vectors.column(src));
    }
    SymEig {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: out,
    }
}
