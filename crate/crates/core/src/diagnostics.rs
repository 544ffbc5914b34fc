//! Numerical checks of the convergence theory on recorded runs: the PL
//! ratio, fitted contraction rates, the auxiliary-sequence identity of the
//! AMSGrad analysis, the bound on `A_t^{-1/2}`, spectral probes and
//! milestone extraction.

use crate::error::{Error, Result};
use crate::linalg::{default_trunc_tol, dot, norm, thin_svd};
use crate::problems::{dense_jacobian, gradient, objective, ResidualProblem};

/// Losses below this are treated as the floating-point floor and skipped
/// by [`fit_series`].
pub const FIT_FLOOR: f64 = 1e-14;

/// `‖∇f(θ)‖² / (2 f(θ))`. Undefined at a solution.
pub fn pl_ratio(p: &dyn ResidualProblem, theta: &[f64]) -> Result<f64> {
    let f = objective(p, theta)?;
    if f <= 1e-16 {
        return Err(Error::input(format!(
            "pl_ratio: f = {f:e} is at the solution"
        )));
    }
    let g = gradient(p, theta)?;
    Ok(dot(&g, &g) / (2.0 * f))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Per-step contraction factor `exp(slope)`.
    pub rho: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r2: f64,
    /// Half-open index range `[start, end)` the fit used.
    pub window: (usize, usize),
}

/// Least-squares fit of `log yₜ ≈ a + t log ρ` over `window` (default: the
/// last half of the series), skipping entries below [`FIT_FLOOR`].
pub fn fit_series(values: &[f64], window: Option<(usize, usize)>) -> Result<RateFit> {
    let (start, end) = window.unwrap_or((values.len() / 2, values.len()));
    if start > end || end > values.len() {
        return Err(Error::input(format!(
            "fit window ({start}, {end}) outside series of length {}",
            values.len()
        )));
    }
    let pts: Vec<(f64, f64)> = (start..end)
        .filter(|&t| values[t].is_finite() && values[t] >= FIT_FLOOR)
        .map(|t| (t as f64, values[t].ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::input(format!(
            "fit needs at least 5 usable points, window ({start}, {end}) has {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    // a constant series is fitted exactly by a zero slope
    let r2 = if syy <= f64::EPSILON * n * my.abs().max(1.0) {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    Ok(RateFit {
        rho: slope.exp(),
        r2,
        window: (start, end),
    })
}

/// Loss-rate fit over a recorded trace.
pub fn fit_rate(
    rows: &[crate::optim::TraceRow],
    window: Option<(usize, usize)>,
) -> Result<RateFit> {
    let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
    fit_series(&losses, window)
}

/// One step of a recorded AMSGrad run, for the auxiliary-sequence identity.
/// `t ≥ 2` indexes the step that maps `θ_t` to `θ_{t+1}`.
#[derive(Clone, Copy, Debug)]
pub struct ZStep<'a> {
    pub t: usize,
    pub theta_prev: &'a [f64],
    pub theta: &'a [f64],
    pub theta_next: &'a [f64],
    pub m_prev: &'a [f64],
    pub lambda: &'a [f64],
    pub v_hat_prev: &'a [f64],
    pub v_hat: &'a [f64],
    pub lr_prev: f64,
    pub lr: f64,
}

/// `A = lr / √(v̂ + ε)` elementwise.
pub fn a_diag(lr: f64, v_hat: &[f64], eps: f64) -> Vec<f64> {
    v_hat.iter().map(|v| lr / (v + eps).sqrt()).collect()
}

/// `‖(z_{t+1} − z_t) − (c (A_{t−1} − A_t) m_{t−1} − A_t λ_t)‖` with
/// `z_t = θ_t + c (θ_t − θ_{t−1})` and `c = β₁ / (1 − β₁)`.
pub fn z_identity_residual(s: &ZStep<'_>, beta1: f64, eps: f64) -> Result<f64> {
    if s.t < 2 {
        return Err(Error::input(format!(
            "z identity needs t >= 2, got t = {}; use z_identity_first_step",
            s.t
        )));
    }
    let n = s.theta.len();
    for (name, v) in [
        ("theta_prev", s.theta_prev),
        ("theta_next", s.theta_next),
        ("m_prev", s.m_prev),
        ("lambda", s.lambda),
        ("v_hat_prev", s.v_hat_prev),
        ("v_hat", s.v_hat),
    ] {
        if v.len() != n {
            return Err(Error::input(format!(
                "z identity: {name} has length {}, expected {n}",
                v.len()
            )));
        }
    }
    let c = beta1 / (1.0 - beta1);
    let a_prev = a_diag(s.lr_prev, s.v_hat_prev, eps);
    let a = a_diag(s.lr, s.v_hat, eps);
    let diff: Vec<f64> = (0..n)
        .map(|i| {
            let step = s.theta_next[i] - s.theta[i];
            let lhs = step + c * (step - (s.theta[i] - s.theta_prev[i]));
            let rhs = c * (a_prev[i] - a[i]) * s.m_prev[i] - a[i] * s.lambda[i];
            lhs - rhs
        })
        .collect();
    Ok(norm(&diff))
}

/// The `t = 1` case: with `θ₀ = θ₁` and `m₀ = 0`, `z₂ − z₁ = −A₁ λ₁`.
/// Returns the norm of the mismatch.
pub fn z_identity_first_step(
    theta1: &[f64],
    theta2: &[f64],
    lambda1: &[f64],
    v_hat1: &[f64],
    lr: f64,
    beta1: f64,
    eps: f64,
) -> f64 {
    let c = beta1 / (1.0 - beta1);
    let a = a_diag(lr, v_hat1, eps);
    let diff: Vec<f64> = (0..theta1.len())
        .map(|i| {
            let step = theta2[i] - theta1[i];
            step + c * step + a[i] * lambda1[i]
        })
        .collect();
    norm(&diff)
}

/// Both sides of the uniform bound on `A_t^{-1/2}`:
/// `max_i (v̂ᵢ + ε)^{1/4} / √α` and `((M² + ε) / α²)^{1/4}` where `M` is the
/// largest `‖λ‖∞` observed so far.
pub fn at_bound(v_hat: &[f64], max_lambda_inf: f64, alpha: f64, eps: f64) -> (f64, f64) {
    let lhs = v_hat
        .iter()
        .map(|v| (v + eps).powf(0.25) / alpha.sqrt())
        .fold(0.0, f64::max);
    let rhs = ((max_lambda_inf * max_lambda_inf + eps) / (alpha * alpha)).powf(0.25);
    (lhs, rhs)
}

pub fn at_bound_check(v_hat: &[f64], max_lambda_inf: f64, alpha: f64, eps: f64) -> bool {
    let (lhs, rhs) = at_bound(v_hat, max_lambda_inf, alpha, eps);
    lhs <= rhs + 1e-12
}

/// For each threshold (positive, strictly descending) the first index whose
/// value is at or below it, or `None` if never reached.
pub fn milestones(values: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, Option<usize>)>> {
    validate_thresholds(thresholds)?;
    Ok(thresholds
        .iter()
        .map(|&tau| (tau, values.iter().position(|&v| v <= tau)))
        .collect())
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::config(format!(
            "thresholds must be positive, got {thresholds:?}"
        )));
    }
    if thresholds.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config(format!(
            "thresholds must be strictly descending, got {thresholds:?}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralProbe {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub kappa: f64,
    pub rank: usize,
}

/// Extreme retained singular values of the dense Jacobian at `θ`.
pub fn spectral_probe(
    p: &dyn ResidualProblem,
    theta: &[f64],
    trunc_tol: Option<f64>,
) -> Result<SpectralProbe> {
    let j = dense_jacobian(p, theta)?;
    let tol = trunc_tol.unwrap_or_else(|| default_trunc_tol(j.rows(), j.cols()));
    let svd = thin_svd(&j, tol)?;
    match (svd.sigma_min(), svd.sigma_max()) {
        (Some(lo), Some(hi)) => Ok(SpectralProbe {
            sigma_min: lo,
            sigma_max: hi,
            kappa: hi / lo,
            rank: svd.rank,
        }),
        _ => Err(Error::input(format!(
            "{}: Jacobian has no singular values above the truncation threshold",
            p.name()
        ))),
    }
}

/// Empirical exponent `s` in `max_i ‖g_{1:T,i}‖₂ ≈ M T^s`, from a log-log
/// fit over the prefix lengths `T = 1, 2, 4, ...`. Diagnostic only.
pub fn growth_exponent(grads: &[Vec<f64>]) -> Result<f64> {
    if grads.len() < 4 {
        return Err(Error::input(
            "growth_exponent needs at least 4 recorded vectors",
        ));
    }
    let dim = grads[0].len();
    let mut sq = vec![0.0; dim];
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut next = 1;
    for (i, g) in grads.iter().enumerate() {
        for (s, x) in sq.iter_mut().zip(g) {
            *s += x * x;
        }
        if i + 1 == next {
            let peak = sq.iter().cloned().fold(0.0, f64::max).sqrt();
            if peak > 0.0 {
                pts.push((((i + 1) as f64).ln(), peak.ln()));
            }
            next *= 2;
        }
    }
    if pts.len() < 2 {
        return Err(Error::input("growth_exponent: too few nonzero prefixes"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
