use crate::error::{Error, Result};
use crate::linalg::{default_trunc_tol, thin_svd};
use crate::precond::{precondition, spgd_direction};
use crate::problems::{dense_jacobian, gradient, ResidualProblem};

use super::HyperParams;

/// Parameters and moment accumulators. `t` counts completed steps.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub theta: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub t: usize,
}

impl OptimizerState {
    pub fn new(theta: Vec<f64>) -> Self {
        let n = theta.len();
        OptimizerState {
            theta,
            m: vec![0.0; n],
            v: vec![0.0; n],
            v_hat: vec![0.0; n],
            t: 0,
        }
    }
}

/// What a moment-based step consumed, for diagnostics.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// Preconditioned gradient `λ_t` (the raw gradient for Adam).
    pub lambda: Vec<f64>,
    pub m_prev: Vec<f64>,
    pub v_hat_prev: Vec<f64>,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct SpgdStep {
    pub theta: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

fn at_step(t: usize, e: Error) -> Error {
    match e {
        Error::NumericalFailure(msg) => Error::numerical(format!("step {t}: {msg}")),
        Error::InvalidInput(msg) => Error::input(format!("step {t}: {msg}")),
        Error::InvalidConfig(msg) => Error::config(format!("step {t}: {msg}")),
    }
}

fn check_lr(lr: f64) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::input(format!("learning rate must be > 0, got {lr}")));
    }
    Ok(())
}

fn finite_or(what: &str, t: usize, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical(format!(
            "step {t}: {what} became non-finite"
        )));
    }
    Ok(())
}

/// `θ − lr ∇f(θ)`
pub fn gd_step(p: &dyn ResidualProblem, theta: &[f64], lr: f64) -> Result<Vec<f64>> {
    gd_update(theta, &gradient(p, theta)?, lr)
}

pub(super) fn gd_update(theta: &[f64], g: &[f64], lr: f64) -> Result<Vec<f64>> {
    check_lr(lr)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("gradient is not finite"));
    }
    Ok(theta.iter().zip(g).map(|(x, gi)| x - lr * gi).collect())
}

/// `θ − lr V Uᵀ F(θ)` from the truncated SVD of the dense Jacobian. Also
/// reports the extreme retained singular values.
pub fn spgd_step(
    p: &dyn ResidualProblem,
    theta: &[f64],
    lr: f64,
    trunc_tol: Option<f64>,
) -> Result<SpgdStep> {
    check_lr(lr)?;
    let j = dense_jacobian(p, theta)?;
    let tol = trunc_tol.unwrap_or_else(|| default_trunc_tol(j.rows(), j.cols()));
    let svd = thin_svd(&j, tol)?;
    let f = p.residual(theta);
    let d = spgd_direction(&svd, &f)?;
    let theta = theta.iter().zip(&d).map(|(x, di)| x - lr * di).collect();
    Ok(SpgdStep {
        theta,
        sigma_min: svd.sigma_min().unwrap_or(0.0),
        sigma_max: svd.sigma_max().unwrap_or(0.0),
    })
}

/// Shared SPGD-Adam / AMSGrad update. `grad` may carry the gradient at
/// the current `θ` if the caller already has it.
pub(super) fn moment_step(
    p: &dyn ResidualProblem,
    state: &mut OptimizerState,
    hyper: &HyperParams,
    amsgrad: bool,
    grad: Option<Vec<f64>>,
) -> Result<StepOutcome> {
    let t = state.t + 1;
    let lr = hyper.lr_at(state.t);
    let g = match grad {
        Some(g) => g,
        None => gradient(p, &state.theta).map_err(|e| at_step(t, e))?,
    };
    finite_or("gradient", t, &g)?;
    let lambda = precondition(p, &state.theta, &g, &hyper.precond).map_err(|e| at_step(t, e))?;
    finite_or("preconditioned gradient", t, &lambda)?;

    let m_prev = state.m.clone();
    let v_hat_prev = state.v_hat.clone();
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    for i in 0..lambda.len() {
        let l = lambda[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * l;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * l * l;
        let denom = if amsgrad {
            state.v_hat[i] = state.v_hat[i].max(state.v[i]);
            state.v_hat[i]
        } else {
            state.v[i]
        };
        state.theta[i] -= lr * state.m[i] / (denom + hyper.eps).sqrt();
    }
    finite_or("theta", t, &state.theta)?;
    state.t = t;
    Ok(StepOutcome {
        lambda,
        m_prev,
        v_hat_prev,
        lr,
    })
}

/// One step of SPGD in the Adam framework: `λ = B g`, first and second
/// moments without bias correction, `θ −= lr m / √(v + ε)`.
pub fn spgd_adam_step(
    p: &dyn ResidualProblem,
    state: &mut OptimizerState,
    hyper: &HyperParams,
) -> Result<StepOutcome> {
    moment_step(p, state, hyper, false, None)
}

/// As [`spgd_adam_step`], with the denominator taken from the running
/// maximum `v̂ = max(v̂, v)`. Requires `β₁ < √β₂`.
pub fn spgd_amsgrad_step(
    p: &dyn ResidualProblem,
    state: &mut OptimizerState,
    hyper: &HyperParams,
) -> Result<StepOutcome> {
    if hyper.beta1 >= hyper.beta2.sqrt() {
        return Err(Error::config(format!(
            "spgd-amsgrad requires beta1 < sqrt(beta2); got beta1 = {}, beta2 = {}",
            hyper.beta1, hyper.beta2
        )));
    }
    moment_step(p, state, hyper, true, None)
}

/// Standard Adam on the raw gradient, with bias correction and `ε` outside
/// the square root.
pub fn adam_step(
    p: &dyn ResidualProblem,
    state: &mut OptimizerState,
    hyper: &HyperParams,
) -> Result<StepOutcome> {
    let g = gradient(p, &state.theta).map_err(|e| at_step(state.t + 1, e))?;
    adam_update(state, hyper, g)
}

pub(super) fn adam_update(
    state: &mut OptimizerState,
    hyper: &HyperParams,
    g: Vec<f64>,
) -> Result<StepOutcome> {
    let t = state.t + 1;
    let lr = hyper.lr_at(state.t);
    finite_or("gradient", t, &g)?;
    let m_prev = state.m.clone();
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    for i in 0..g.len() {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        state.theta[i] -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
    finite_or("theta", t, &state.theta)?;
    state.t = t;
    Ok(StepOutcome {
        lambda: g,
        m_prev,
        v_hat_prev: state.v_hat.clone(),
        lr,
    })
}
