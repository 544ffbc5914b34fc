use super::ResidualProblem;
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_columns, sub, Matrix};
use crate::rng::Rng;

/// Linear least squares `F(θ) = Aθ − b`.
#[derive(Clone, Debug)]
pub struct LinearLsq {
    pub a: Matrix,
    pub b: Vec<f64>,
    theta_star: Option<Vec<f64>>,
}

impl LinearLsq {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::input(format!(
                "LinearLsq: b has length {}, A has {} rows",
                b.len(),
                a.rows()
            )));
        }
        Ok(LinearLsq {
            a,
            b,
            theta_star: None,
        })
    }

    /// Attaches a known exact solution.
    pub fn with_solution(mut self, theta_star: Vec<f64>) -> Self {
        self.theta_star = Some(theta_star);
        self
    }
}

/// Random consistent problem `A = U₀ diag(s) V₀ᵀ`, `b = A θ*`, with
/// singular values `s` geometrically spaced from `kappa` down to 1.
pub fn make_linear_lsq(m: usize, n: usize, kappa: f64, seed: u64) -> Result<LinearLsq> {
    if m < 2 || n < m {
        return Err(Error::input(format!(
            "make_linear_lsq: need n >= m >= 2, got m={m}, n={n}"
        )));
    }
    if !(kappa >= 1.0) {
        return Err(Error::input(format!(
            "make_linear_lsq: kappa must be >= 1, got {kappa}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut u0 = Matrix::from_row_major(n, m, rng.normal_vec(n * m))?;
    orthonormalize_columns(&mut u0)?;
    let mut v0 = Matrix::from_row_major(m, m, rng.normal_vec(m * m))?;
    orthonormalize_columns(&mut v0)?;
    let sigma: Vec<f64> = (0..m)
        .map(|i| kappa.powf(1.0 - i as f64 / (m - 1) as f64))
        .collect();
    let a = u0.scale_columns(&sigma).matmul(&v0.transpose());
    let theta_star = rng.normal_vec(m);
    let b = a.matvec(&theta_star);
    Ok(LinearLsq::new(a, b)?.with_solution(theta_star))
}

impl ResidualProblem for LinearLsq {
    fn name(&self) -> &str {
        "linear-lsq"
    }

    fn param_dim(&self) -> usize {
        self.a.cols()
    }

    fn residual_dim(&self) -> usize {
        self.a.rows()
    }

    fn residual(&self, theta: &[f64]) -> Vec<f64> {
        sub(&self.a.matvec(theta), &self.b)
    }

    fn jvp(&self, _theta: &[f64], v: &[f64]) -> Vec<f64> {
        self.a.matvec(v)
    }

    fn vjp(&self, _theta: &[f64], u: &[f64]) -> Vec<f64> {
        self.a.matvec_t(u)
    }

    fn jacobian(&self, _theta: &[f64]) -> Option<Matrix> {
        Some(self.a.clone())
    }

    fn initial_point(&self, rng: &mut Rng) -> Vec<f64> {
        rng.normal_vec(self.param_dim())
    }

    fn reference_solution(&self) -> Option<Vec<f64>> {
        self.theta_star.clone()
    }
}
