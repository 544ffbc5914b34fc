use super::ResidualProblem;
use crate::error::{Error, Result};
use crate::linalg::{norm, thin_svd, Matrix};
use crate::rng::Rng;

/// Pointwise nonlinearity `g` of the discrete PDE residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Nonlinearity {
    Zero,
    /// `g(u) = u³`
    Cubic,
    /// `g(u) = λ eᵘ` (Bratu)
    Bratu(f64),
}

impl Nonlinearity {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Cubic => u * u * u,
            Nonlinearity::Bratu(l) => l * u.exp(),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Cubic => 3.0 * u * u,
            Nonlinearity::Bratu(l) => l * u.exp(),
        }
    }
}

/// 1D finite-difference residual `F(θ) = Δₕθ + g(θ)` on `N` interior nodes
/// of `(0, 1)` with zero Dirichlet boundary values and `h = 1/(N+1)`.
#[derive(Clone, Debug)]
pub struct DiscretePde {
    grid_size: usize,
    h: f64,
    g: Nonlinearity,
    root: Option<Vec<f64>>,
    init_radius: f64,
}

impl DiscretePde {
    pub fn new(grid_size: usize, g: Nonlinearity) -> Result<Self> {
        if grid_size < 1 {
            return Err(Error::input("DiscretePde: grid size must be >= 1"));
        }
        let root = match g {
            Nonlinearity::Zero => Some(vec![0.0; grid_size]),
            _ => None,
        };
        Ok(DiscretePde {
            grid_size,
            h: 1.0 / (grid_size + 1) as f64,
            g,
            root,
            init_radius: 0.1,
        })
    }

    /// Radius of the ball around the root from which
    /// [`ResidualProblem::initial_point`] draws.
    pub fn with_init_radius(mut self, r: f64) -> Self {
        self.init_radius = r;
        self
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.grid_size).map(|i| i as f64 * self.h).collect()
    }

    /// Newton's method from `start`, certified by `‖F(θ*)‖ <= tol`. The
    /// root is stored and returned.
    pub fn solve_root(&mut self, start: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut theta = start.to_vec();
        for _ in 0..100 {
            let f = self.residual(&theta);
            if norm(&f) <= tol {
                self.root = Some(theta.clone());
                return Ok(theta);
            }
            let j = self.jacobian_matrix(&theta);
            let svd = thin_svd(&j, 1e-14)?;
            // Newton step via the pseudoinverse
            let utf = svd.u.matvec_t(&f);
            let coef: Vec<f64> = utf.iter().zip(&svd.sigma).map(|(c, s)| c / s).collect();
            let step = svd.v.matvec(&coef);
            theta.iter_mut().zip(&step).for_each(|(t, s)| *t -= s);
        }
        let r = norm(&self.residual(&theta));
        if r <= tol {
            self.root = Some(theta.clone());
            Ok(theta)
        } else {
            Err(Error::numerical(format!(
                "DiscretePde: Newton stalled at residual norm {r:e}"
            )))
        }
    }

    /// Solves for the positive root reached by Newton from `amp · sin(πx)`.
    pub fn with_sine_root(mut self, amp: f64, tol: f64) -> Result<Self> {
        let start: Vec<f64> = self
            .nodes()
            .iter()
            .map(|x| amp * (std::f64::consts::PI * x).sin())
            .collect();
        self.solve_root(&start, tol)?;
        Ok(self)
    }

    fn laplacian(&self, v: &[f64]) -> Vec<f64> {
        let n = self.grid_size;
        let inv_h2 = 1.0 / (self.h * self.h);
        (0..n)
            .map(|i| {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                (left - 2.0 * v[i] + right) * inv_h2
            })
            .collect()
    }

    fn jacobian_matrix(&self, theta: &[f64]) -> Matrix {
        let n = self.grid_size;
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut j = Matrix::zeros(n, n);
        for i in 0..n {
            j[(i, i)] = -2.0 * inv_h2 + self.g.derivative(theta[i]);
            if i > 0 {
                j[(i, i - 1)] = inv_h2;
            }
            if i + 1 < n {
                j[(i, i + 1)] = inv_h2;
            }
        }
        j
    }
}

impl ResidualProblem for DiscretePde {
    fn name(&self) -> &str {
        "discrete-pde"
    }

    fn param_dim(&self) -> usize {
        self.grid_size
    }

    fn residual_dim(&self) -> usize {
        self.grid_size
    }

    fn residual(&self, theta: &[f64]) -> Vec<f64> {
        let mut f = self.laplacian(theta);
        for (fi, &t) in f.iter_mut().zip(theta) {
            *fi += self.g.value(t);
        }
        f
    }

    fn jvp(&self, theta: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = self.laplacian(v);
        for i in 0..self.grid_size {
            out[i] += self.g.derivative(theta[i]) * v[i];
        }
        out
    }

    fn vjp(&self, theta: &[f64], u: &[f64]) -> Vec<f64> {
        // the stencil is symmetric
        self.jvp(theta, u)
    }

    fn jacobian(&self, theta: &[f64]) -> Option<Matrix> {
        Some(self.jacobian_matrix(theta))
    }

    /// Uniform direction on the sphere of radius `init_radius` around the
    /// stored root (or around zero when no root is known).
    fn initial_point(&self, rng: &mut Rng) -> Vec<f64> {
        let dir = rng.normal_vec(self.grid_size);
        let n = norm(&dir);
        let center = self
            .root
            .clone()
            .unwrap_or_else(|| vec![0.0; self.grid_size]);
        center
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + self.init_radius * d / n)
            .collect()
    }

    fn reference_solution(&self) -> Option<Vec<f64>> {
        self.root.clone()
    }
}
