use super::{Mlp, ResidualProblem};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonConfig {
    pub dim: usize,
    pub hidden: Vec<usize>,
    pub n_interior: usize,
    pub n_boundary: usize,
    /// Boundary penalty weight.
    pub lambda_bc: f64,
    pub test_size: usize,
    pub data_seed: u64,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig {
            dim: 2,
            hidden: vec![16, 16],
            n_interior: 256,
            n_boundary: 128,
            lambda_bc: 1000.0,
            test_size: 1 << 12,
            data_seed: 0,
        }
    }
}

/// Collocation residual for `Δu = 2d` in the unit ball with `u = 1` on the
/// sphere; exact solution `u*(x) = ‖x‖²`.
///
/// Interior entries are `√(2/N) (Δu(xᵢ;θ) − 2d)` and boundary entries
/// `√(2λ/N_bc) (u(x_b;θ) − 1)`, so `½‖F‖²` equals the weighted mean-square
/// collocation loss. Ball points use a normalized Gaussian direction and
/// radius `r = U^{1/d}`; boundary points use the direction alone.
#[derive(Clone, Debug)]
pub struct PoissonCollocation {
    net: Mlp,
    cfg: PoissonConfig,
    interior: Vec<f64>,
    boundary: Vec<f64>,
    test: Vec<f64>,
}

fn sample_sphere(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let v = rng.normal_vec(d);
        let n = norm(&v);
        if n > 0.0 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn sample_ball(rng: &mut Rng, d: usize) -> Vec<f64> {
    let dir = sample_sphere(rng, d);
    let r = rng.uniform().powf(1.0 / d as f64);
    dir.iter().map(|x| r * x).collect()
}

impl PoissonCollocation {
    pub fn new(cfg: PoissonConfig) -> Result<Self> {
        if cfg.dim == 0 || cfg.n_interior == 0 || cfg.n_boundary == 0 {
            return Err(Error::input(
                "PoissonCollocation: dim and point counts must be positive",
            ));
        }
        if !(cfg.lambda_bc > 0.0) {
            return Err(Error::input(
                "PoissonCollocation: lambda_bc must be positive",
            ));
        }
        let mut widths = vec![cfg.dim];
        widths.extend(&cfg.hidden);
        widths.push(1);
        let net = Mlp::new(widths)?;
        let mut rng = Rng::new(cfg.data_seed);
        let test = (0..cfg.test_size)
            .flat_map(|_| sample_ball(&mut rng, cfg.dim))
            .collect();
        let mut p = PoissonCollocation {
            net,
            cfg,
            interior: Vec::new(),
            boundary: Vec::new(),
            test,
        };
        p.resample(&mut rng);
        Ok(p)
    }

    pub fn exact(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn interior_scale(&self) -> f64 {
        (2.0 / self.cfg.n_interior as f64).sqrt()
    }

    fn boundary_scale(&self) -> f64 {
        (2.0 * self.cfg.lambda_bc / self.cfg.n_boundary as f64).sqrt()
    }

    fn rhs(&self) -> f64 {
        2.0 * self.cfg.dim as f64
    }
}

impl ResidualProblem for PoissonCollocation {
    fn name(&self) -> &str {
        "poisson"
    }

    fn param_dim(&self) -> usize {
        self.net.param_count()
    }

    fn residual_dim(&self) -> usize {
        self.cfg.n_interior + self.cfg.n_boundary
    }

    fn residual(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.cfg.dim;
        let (si, sb) = (self.interior_scale(), self.boundary_scale());
        let mut f: Vec<f64> = self
            .interior
            .chunks(d)
            .map(|x| {
                let lap = self
                    .net
                    .forward_laplacian(theta, x)
                    .expect("shape checked")
                    .laplacian[0];
                si * (lap - self.rhs())
            })
            .collect();
        f.extend(
            self.boundary
                .chunks(d)
                .map(|x| sb * (self.net.forward(theta, x).expect("shape checked")[0] - 1.0)),
        );
        f
    }

    fn jvp(&self, theta: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.cfg.dim;
        let (si, sb) = (self.interior_scale(), self.boundary_scale());
        let mut out: Vec<f64> = self
            .interior
            .chunks(d)
            .map(|x| {
                si * self
                    .net
                    .jvp_laplacian(theta, x, v)
                    .expect("shape checked")
                    .d_laplacian[0]
            })
            .collect();
        out.extend(
            self.boundary
                .chunks(d)
                .map(|x| sb * self.net.jvp(theta, x, v).expect("shape checked").d_value[0]),
        );
        out
    }

    fn vjp(&self, theta: &[f64], u: &[f64]) -> Vec<f64> {
        let d = self.cfg.dim;
        let (si, sb) = (self.interior_scale(), self.boundary_scale());
        let mut grad = vec![0.0; self.param_dim()];
        let (ui, ub) = u.split_at(self.cfg.n_interior);
        for (x, w) in self.interior.chunks(d).zip(ui) {
            self.net
                .vjp_laplacian(theta, x, &[0.0], &[si * w], &mut grad)
                .expect("shape checked");
        }
        for (x, w) in self.boundary.chunks(d).zip(ub) {
            self.net
                .vjp(theta, x, &[sb * w], &mut grad)
                .expect("shape checked");
        }
        grad
    }

    fn initial_point(&self, rng: &mut Rng) -> Vec<f64> {
        self.net.xavier_normal(rng)
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn resample(&mut self, rng: &mut Rng) {
        let d = self.cfg.dim;
        self.interior = (0..self.cfg.n_interior)
            .flat_map(|_| sample_ball(rng, d))
            .collect();
        self.boundary = (0..self.cfg.n_boundary)
            .flat_map(|_| sample_sphere(rng, d))
            .collect();
    }

    /// Relative L² error against `‖x‖²` on the fixed test points.
    fn eval_loss(&self, theta: &[f64]) -> Option<f64> {
        if self.test.is_empty() {
            return None;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for x in self.test.chunks(self.cfg.dim) {
            let exact = Self::exact(x);
            let u = self.net.forward(theta, x).expect("shape checked")[0];
            num += (u - exact).powi(2);
            den += exact * exact;
        }
        Some((num / den).sqrt())
    }
}
