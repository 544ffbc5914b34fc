//! The property suite behind `spgd check`.

use crate::diagnostics::{
    at_bound_check, fit_series, z_identity_first_step, z_identity_residual, ZStep,
};
use crate::error::Result;
use crate::linalg::{dot, norm, norm_inf, sub, thin_svd, Matrix};
use crate::optim::{run, HyperParams, Method, Observer, StepRecord};
use crate::precond::{
    damped_apply_dense, damped_apply_lanczos, fisher_block_apply, precond_gradient_exact,
    spgd_direction, FisherBlocks, PrecondSpec,
};
use crate::problems::{
    adjoint_check, gradient_check, make_linear_lsq, DiscretePde, MlpRegression, Nonlinearity,
    PoissonCollocation, PoissonConfig, RegressionConfig, ResidualProblem, SoftmaxConfig,
    SoftmaxToy,
};
use crate::rng::Rng;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: impl Into<String>, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => CheckResult::new(name, passed, detail),
            Err(e) => CheckResult::new(name, false, format!("error: {e}")),
        }
    }
}

/// Small instances of every problem family.
pub fn default_problems() -> Result<Vec<Box<dyn ResidualProblem>>> {
    Ok(vec![
        Box::new(make_linear_lsq(6, 8, 10.0, 0)?),
        Box::new(DiscretePde::new(15, Nonlinearity::Cubic)?.with_sine_root(5.0, 1e-10)?),
        Box::new(DiscretePde::new(15, Nonlinearity::Bratu(1.0))?.with_sine_root(0.1, 1e-10)?),
        Box::new(MlpRegression::new(RegressionConfig {
            hidden: vec![8, 8],
            batch: 32,
            test_size: 64,
            ..RegressionConfig::default()
        })?),
        Box::new(PoissonCollocation::new(PoissonConfig {
            hidden: vec![6, 6],
            n_interior: 16,
            n_boundary: 8,
            test_size: 64,
            ..PoissonConfig::default()
        })?),
        Box::new(SoftmaxToy::new(SoftmaxConfig {
            samples: 24,
            ..SoftmaxConfig::default()
        })?),
    ])
}

/// Central-difference gradient comparison at `points` draws of `θ` per
/// problem, relative tolerance `tol`, plus a `Jv`/`Jᵀu` adjointness probe.
pub fn derivative_checks(
    problems: &[Box<dyn ResidualProblem>],
    points: usize,
    tol: f64,
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for p in problems {
        let mut rng = Rng::new(17);
        let mut worst = 0.0f64;
        let mut worst_adj = 0.0f64;
        let mut failure = None;
        for _ in 0..points {
            let theta = p.initial_point(&mut rng);
            match gradient_check(p.as_ref(), &theta) {
                Ok(gap) => worst = worst.max(gap),
                Err(e) => failure = Some(e.to_string()),
            }
            worst_adj = worst_adj.max(adjoint_check(p.as_ref(), &theta, &mut rng, 3));
        }
        out.push(match failure {
            Some(e) => CheckResult::new(format!("gradient {}", p.name()), false, e),
            None => CheckResult::new(
                format!("gradient {}", p.name()),
                worst <= tol,
                format!("max relative gap {worst:.2e} (tol {tol:.0e}, {points} points)"),
            ),
        });
        out.push(CheckResult::new(
            format!("adjoint {}", p.name()),
            worst_adj <= 1e-10,
            format!("max relative mismatch {worst_adj:.2e}"),
        ));
    }
    out
}

fn precond_identity() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for case in 0..10u64 {
        let m = 3 + case as usize;
        let p = make_linear_lsq(m, m + 4, 20.0, 100 + case)?;
        let theta = Rng::new(case).normal_vec(m);
        let f = p.residual(&theta);
        let svd = thin_svd(&p.a, 0.0)?;
        let d = spgd_direction(&svd, &f)?;
        let b = precond_gradient_exact(&svd, &p.loss_gradient(&theta))?;
        worst = worst.max(norm(&sub(&d, &b)) / norm(&f));
    }
    Ok((
        worst <= 1e-10,
        format!("max |VUᵀF - B grad f| / |F| = {worst:.2e}"),
    ))
}

fn lanczos_full_depth() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut rng = Rng::new(5);
    for (i, (mu, p)) in [(1e-5, 0.5), (1e-3, 1.0), (1e-3, 0.5), (1e-5, 1.0)]
        .into_iter()
        .enumerate()
    {
        let m = 6 + 3 * i;
        let j = Matrix::from_row_major(m + 2, m, rng.normal_vec((m + 2) * m))?;
        let g = rng.normal_vec(m);
        let spec = PrecondSpec {
            p,
            ..PrecondSpec::damped_lanczos(mu, m)
        };
        let approx = damped_apply_lanczos(&j, &g, &spec)?;
        let exact = damped_apply_dense(&j, &g, mu, p)?;
        worst = worst.max(norm(&sub(&approx, &exact)) / norm(&exact));
    }
    Ok((worst <= 1e-8, format!("k = m relative error {worst:.2e}")))
}

#[derive(Default)]
struct Steps(Vec<StepRecord>);

impl Observer for Steps {
    fn on_step(&mut self, s: &StepRecord) {
        self.0.push(s.clone());
    }
}

fn amsgrad_identities() -> Result<(bool, String)> {
    let mut p = make_linear_lsq(5, 7, 8.0, 3)?;
    let h = HyperParams {
        alpha: 0.02,
        precond: PrecondSpec::damped_dense(1e-3, 0.5),
        ..HyperParams::default()
    };
    let mut rec = Steps::default();
    run(&mut p, Method::SpgdAmsgrad, &h, 200, 0, &mut rec)?;
    let s = &rec.0;
    let first = z_identity_first_step(
        &s[0].theta_before,
        &s[0].theta_after,
        &s[0].lambda,
        &s[0].v_hat,
        s[0].lr,
        h.beta1,
        h.eps,
    );
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut bounded = true;
    let mut max_lambda = 0.0f64;
    for (i, step) in s.iter().enumerate() {
        max_lambda = max_lambda.max(norm_inf(&step.lambda));
        monotone &= step.v_hat.iter().zip(&step.v_hat_prev).all(|(a, b)| a >= b);
        bounded &= at_bound_check(&step.v_hat, max_lambda, step.lr, h.eps);
        if i > 0 {
            let prev = &s[i - 1];
            let z = ZStep {
                t: step.t,
                theta_prev: &prev.theta_before,
                theta: &step.theta_before,
                theta_next: &step.theta_after,
                m_prev: &step.m_prev,
                lambda: &step.lambda,
                v_hat_prev: &step.v_hat_prev,
                v_hat: &step.v_hat,
                lr_prev: prev.lr,
                lr: step.lr,
            };
            let r = z_identity_residual(&z, h.beta1, h.eps)? / (1.0 + norm(z.theta));
            worst = worst.max(r);
        }
    }
    let ok = first <= 1e-12 && worst <= 1e-10 && monotone && bounded;
    Ok((
        ok,
        format!(
            "t=1 gap {first:.1e}, max scaled z residual {worst:.1e}, v_hat monotone {monotone}, A_t bound {bounded}"
        ),
    ))
}

fn gd_rate() -> Result<(bool, String)> {
    let mut p = make_linear_lsq(16, 16, 10.0, 0)?;
    let svd = thin_svd(&p.a, 0.0)?;
    let smax = svd.sigma_max().unwrap_or(1.0);
    let t = run(
        &mut p,
        Method::Gd,
        &HyperParams::with_alpha(1.0 / (smax * smax)),
        400,
        0,
        &mut crate::optim::NoObserver,
    )?;
    let fit = fit_series(&t.losses(), None)?;
    let bound = 1.0 - 1.0 / 100.0 + 0.01;
    Ok((
        fit.rho <= bound,
        format!(
            "fitted loss rate {:.4} <= {bound:.4} (r2 {:.4})",
            fit.rho, fit.r2
        ),
    ))
}

fn spgd_contraction() -> Result<(bool, String)> {
    let p = make_linear_lsq(16, 16, 10.0, 0)?;
    let svd = thin_svd(&p.a, 0.0)?;
    let alpha = 1.0 / svd.sigma_max().unwrap_or(1.0);
    let bound = 1.0 - alpha * svd.sigma_min().unwrap_or(0.0) + 1e-10;
    let mut theta = Rng::new(1).normal_vec(16);
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let before = norm(&p.residual(&theta));
        if before < 1e-12 {
            break;
        }
        theta = crate::optim::spgd_step(&p, &theta, alpha, None)?.theta;
        worst = worst.max(norm(&p.residual(&theta)) / before);
    }
    Ok((
        worst <= bound,
        format!("max residual ratio {worst:.6} <= {bound:.6}"),
    ))
}

fn fisher_blocks() -> Result<(bool, String)> {
    let mut rng = Rng::new(8);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = 2 + rng.index(5);
        let raw: Vec<f64> = (0..k).map(|_| rng.uniform() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let (u, v) = (rng.normal_vec(k), rng.normal_vec(k));
        worst = worst.max(
            (dot(&v, &fisher_block_apply(&p, &u)) - dot(&u, &fisher_block_apply(&p, &v))).abs(),
        );
        worst = worst.max(norm(&fisher_block_apply(&p, &vec![1.0; k])));
        worst = worst.max(-dot(&u, &fisher_block_apply(&p, &u)).min(0.0));
    }
    let blocks = FisherBlocks::new(2, vec![0.5, 0.5, 0.9, 0.1])?;
    let out = blocks.apply(&[1.0, 0.0, 1.0, 0.0]);
    worst = worst.max(norm(&sub(&out, &[0.25, -0.25, 0.09, -0.09])));
    Ok((
        worst <= 1e-12,
        format!("max symmetry / null-space / PSD violation {worst:.1e}"),
    ))
}

/// Derivative checks on `problems` followed by the preconditioner,
/// Lanczos, AMSGrad, rate and Fisher-block properties.
pub fn run_suite(problems: &[Box<dyn ResidualProblem>]) -> Vec<CheckResult> {
    let mut out = derivative_checks(problems, 5, 1e-5);
    out.push(CheckResult::from_result(
        "precond identity VUᵀF = B grad f",
        precond_identity(),
    ));
    out.push(CheckResult::from_result(
        "lanczos k = m vs dense oracle",
        lanczos_full_depth(),
    ));
    out.push(CheckResult::from_result(
        "amsgrad z identity and v_hat bounds",
        amsgrad_identities(),
    ));
    out.push(CheckResult::from_result(
        "gd loss rate (kappa 10)",
        gd_rate(),
    ));
    out.push(CheckResult::from_result(
        "spgd residual contraction (kappa 10)",
        spgd_contraction(),
    ));
    out.push(CheckResult::from_result(
        "fisher block properties",
        fisher_blocks(),
    ));
    out
}

/// Prints one line per result (failures only when `quiet`) and returns the
/// exit code: 0 if everything passed, 1 otherwise.
pub fn report(results: &[CheckResult], quiet: bool) -> i32 {
    for r in results {
        if !quiet || !r.passed {
            println!(
                "{} {}: {}",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.detail
            );
        }
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        if !quiet {
            println!("all {} checks passed", results.len());
        }
        0
    } else {
        println!(
            "{} of {} checks failed: {}",
            failed.len(),
            results.len(),
            failed.join(", ")
        );
        1
    }
}
