//! Residual problems `F: ℝᵐ → ℝⁿ` and the least-squares objective
//! `f(θ) = ½‖F(θ)‖²` built on them.

mod linear;
mod mlp;
mod mlp_batch;
mod pde;
mod poisson;
mod regression;
mod softmax;

pub use linear::{make_linear_lsq, LinearLsq};
pub use mlp::Mlp;
pub use mlp_batch::MlpLinearization;
pub use pde::{DiscretePde, Nonlinearity};
pub use poisson::{PoissonCollocation, PoissonConfig};
pub use regression::{MlpRegression, RegressionConfig};
pub use softmax::{SoftmaxConfig, SoftmaxToy, PROB_CLAMP};

use crate::error::{Error, Result};
use crate::linalg::{norm, LinearMap, Matrix};
use crate::rng::Rng;

/// A residual map with forward- and reverse-mode Jacobian products.
///
/// Implementations are immutable apart from [`ResidualProblem::resample`],
/// which redraws the mini-batch of stochastic problems.
pub trait ResidualProblem {
    fn name(&self) -> &str;

    /// Number of parameters `m`.
    fn param_dim(&self) -> usize;

    /// Number of residual entries `n`.
    fn residual_dim(&self) -> usize;

    fn residual(&self, theta: &[f64]) -> Vec<f64>;

    /// `J_F(θ) v`
    fn jvp(&self, theta: &[f64], v: &[f64]) -> Vec<f64>;

    /// `J_F(θ)ᵀ u`
    fn vjp(&self, theta: &[f64], u: &[f64]) -> Vec<f64>;

    /// Dense Jacobian, if the problem computes one directly.
    fn jacobian(&self, _theta: &[f64]) -> Option<Matrix> {
        None
    }

    /// The Jacobian at `θ` as a linear map that shares work across
    /// products. `None` means products go through [`ResidualProblem::jvp`]
    /// and [`ResidualProblem::vjp`] directly; see [`linearize`].
    fn linearization<'a>(&'a self, _theta: &'a [f64]) -> Option<Box<dyn LinearMap + 'a>> {
        None
    }

    /// Objective value. Least-squares problems keep the default `½‖F‖²`;
    /// classification problems override it with their own loss.
    fn loss(&self, theta: &[f64]) -> f64 {
        0.5 * norm(&self.residual(theta)).powi(2)
    }

    /// Gradient of [`ResidualProblem::loss`]; `J_Fᵀ F` by default.
    fn loss_gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.vjp(theta, &self.residual(theta))
    }

    /// Loss and gradient together, for problems that can share one forward
    /// pass between them.
    fn loss_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        (self.loss(theta), self.loss_gradient(theta))
    }

    /// Per-sample softmax probabilities (`B` rows of `K`, row-major) for
    /// problems whose outputs are logits. `None` for least-squares problems.
    fn class_probs(&self, _theta: &[f64]) -> Option<(usize, Vec<f64>)> {
        None
    }

    /// Starting point drawn from `rng`.
    fn initial_point(&self, rng: &mut Rng) -> Vec<f64>;

    /// Whether [`ResidualProblem::resample`] changes the residual.
    fn is_stochastic(&self) -> bool {
        false
    }

    /// Redraws the mini-batch. No-op for deterministic problems.
    fn resample(&mut self, _rng: &mut Rng) {}

    /// Held-out evaluation loss (test MSE, relative L² error, ...), when the
    /// problem has one.
    fn eval_loss(&self, _theta: &[f64]) -> Option<f64> {
        None
    }

    /// A known zero (or reference solution) of the residual.
    fn reference_solution(&self) -> Option<Vec<f64>> {
        None
    }
}

/// `f(θ)`, failing if the value is not finite.
pub fn objective(p: &dyn ResidualProblem, theta: &[f64]) -> Result<f64> {
    check_len(p, theta)?;
    let f = p.loss(theta);
    if !f.is_finite() {
        return Err(Error::numerical(format!(
            "objective is not finite at theta = {}",
            preview(theta)
        )));
    }
    Ok(f)
}

/// `∇f(θ)`, failing on non-finite entries.
pub fn gradient(p: &dyn ResidualProblem, theta: &[f64]) -> Result<Vec<f64>> {
    check_len(p, theta)?;
    let g = p.loss_gradient(theta);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical(format!(
            "gradient is not finite at theta = {}",
            preview(theta)
        )));
    }
    Ok(g)
}

/// The problem's own Jacobian, or one assembled column by column from JVPs.
pub fn dense_jacobian(p: &dyn ResidualProblem, theta: &[f64]) -> Result<Matrix> {
    check_len(p, theta)?;
    let j = match p.jacobian(theta) {
        Some(j) => j,
        None => {
            let m = p.param_dim();
            let mut jac = Matrix::zeros(p.residual_dim(), m);
            let mut e = vec![0.0; m];
            for i in 0..m {
                e[i] = 1.0;
                jac.set_column(i, &p.jvp(theta, &e));
                e[i] = 0.0;
            }
            jac
        }
    };
    if !j.is_finite() {
        return Err(Error::numerical(format!(
            "Jacobian is not finite at theta = {}",
            preview(theta)
        )));
    }
    Ok(j)
}

/// Central finite-difference gradient of the loss with per-coordinate step
/// `1e-6 * (1 + |θᵢ|)`.
pub fn fd_gradient(p: &dyn ResidualProblem, theta: &[f64]) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + theta[i].abs());
            x[i] = theta[i] + h;
            let fp = p.loss(&x);
            x[i] = theta[i] - h;
            let fm = p.loss(&x);
            x[i] = theta[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Relative gap `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)` between the analytic and
/// finite-difference gradients.
pub fn gradient_check(p: &dyn ResidualProblem, theta: &[f64]) -> Result<f64> {
    let g = gradient(p, theta)?;
    let fd = fd_gradient(p, theta);
    let diff = norm(&crate::linalg::sub(&g, &fd));
    let scale = norm(&g).max(norm(&fd));
    Ok(if scale == 0.0 { 0.0 } else { diff / scale })
}

/// Relative mismatch of `<J v, u>` and `<v, Jᵀ u>` over random probes at `θ`.
pub fn adjoint_check(p: &dyn ResidualProblem, theta: &[f64], rng: &mut Rng, probes: usize) -> f64 {
    crate::linalg::adjoint_mismatch(&JacobianAt { p, theta }, rng, probes)
}

/// The problem's own linearization at `θ`, or a [`JacobianAt`] wrapper.
pub fn linearize<'a>(p: &'a dyn ResidualProblem, theta: &'a [f64]) -> Box<dyn LinearMap + 'a> {
    p.linearization(theta)
        .unwrap_or_else(|| Box::new(JacobianAt { p, theta }))
}

/// The Jacobian at a fixed point as a [`LinearMap`].
pub struct JacobianAt<'a> {
    pub p: &'a dyn ResidualProblem,
    pub theta: &'a [f64],
}

impl LinearMap for JacobianAt<'_> {
    fn in_dim(&self) -> usize {
        self.p.param_dim()
    }

    fn out_dim(&self) -> usize {
        self.p.residual_dim()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.p.jvp(self.theta, v)
    }

    fn apply_adjoint(&self, u: &[f64]) -> Vec<f64> {
        self.p.vjp(self.theta, u)
    }
}

fn check_len(p: &dyn ResidualProblem, theta: &[f64]) -> Result<()> {
    if theta.len() != p.param_dim() {
        return Err(Error::input(format!(
            "{}: theta has length {}, expected {}",
            p.name(),
            theta.len(),
            p.param_dim()
        )));
    }
    Ok(())
}

pub(crate) fn preview(theta: &[f64]) -> String {
    if theta.len() <= 6 {
        format!("{theta:?}")
    } else {
        format!("{:?}... (len {})", &theta[..6], theta.len())
    }
}
