// One pass/fail line per acceptance criterion. The criteria run one after
// another inside a single test so the timing budgets are not skewed by
// other tests sharing the core.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use spgd::diagnostics::{
    at_bound_check, fit_series, z_identity_first_step, z_identity_residual, ZStep,
};
use spgd::harness::cli::{main_with_args, EXIT_OK};
use spgd::harness::{run_cells, RunConfig};
use spgd::linalg::{default_trunc_tol, norm, norm_inf, thin_svd, Matrix};
use spgd::optim::{
    gd_step, run, spgd_step, HyperParams, Method, Observer, StaircaseSchedule, StepRecord, Trace,
};
use spgd::precond::{
    damped_apply_lanczos, fisher_block_apply, spgd_direction, FisherBlocks, PrecondSpec,
};
use spgd::problems::{
    make_linear_lsq, DiscretePde, MlpRegression, Nonlinearity, PoissonCollocation, PoissonConfig,
    RegressionConfig, ResidualProblem, SoftmaxConfig, SoftmaxToy,
};
use spgd::rng::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn to_na(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_row_major(rows, cols, rng.normal_vec(rows * cols)).unwrap()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

// B ∇f with B = [(JᵀJ)†]^{1/2} = V Σ⁻¹ Vᵀ, from nalgebra's SVD.
fn criterion_1() -> Outcome {
    let mut rng = Rng::new(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = 1 + rng.index(32);
        let n = m + rng.index(33 - m);
        let j = random_matrix(&mut rng, n, m);
        let f = rng.normal_vec(n);

        let svd = thin_svd(&j, default_trunc_tol(n, m)).unwrap();
        assert_eq!(svd.rank, m, "random Gaussian matrix should have full rank");
        let ours = spgd_direction(&svd, &f).unwrap();

        let jn = to_na(&j);
        let grad = jn.transpose() * DVector::from_vec(f.clone());
        let s = jn.svd(false, true);
        let vt = s.v_t.unwrap();
        let inv = DMatrix::from_diagonal(&s.singular_values.map(|x| 1.0 / x));
        let b = vt.transpose() * inv * &vt;
        let oracle = b * grad;

        worst = worst.max(diff_norm(&ours, oracle.as_slice()) / norm(&f));
    }
    outcome(
        worst <= 1e-10,
        format!("worst ‖VUᵀF − B∇f‖/‖F‖ = {worst:.2e} over 50 problems"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = Rng::new(202);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &p in &[0.5, 1.0] {
        for &mu in &[1e-5, 1e-3] {
            for _ in 0..5 {
                let m = 2 + rng.index(31);
                let n = m + 2 + rng.index(16);
                let j = random_matrix(&mut rng, n, m);
                let g = rng.normal_vec(m);
                let spec = PrecondSpec {
                    p,
                    ..PrecondSpec::damped_lanczos(mu, m)
                };
                let ours = damped_apply_lanczos(&j, &g, &spec).unwrap();

                let jn = to_na(&j);
                let eig = (jn.transpose() * &jn).symmetric_eigen();
                let f = eig.eigenvalues.map(|l| (l + mu).powf(-p));
                let q = &eig.eigenvectors;
                let oracle = q * DMatrix::from_diagonal(&f) * q.transpose() * DVector::from_vec(g);

                worst = worst.max(diff_norm(&ours, oracle.as_slice()) / oracle.norm());
                cases += 1;
            }
        }
    }
    outcome(
        worst <= 1e-8,
        format!("worst relative error {worst:.2e} over {cases} cases (k = m)"),
    )
}

fn criterion_3() -> Outcome {
    let kappa = 10.0;
    let p = make_linear_lsq(16, 16, kappa, 3).unwrap();
    let smax = thin_svd(&p.jacobian(&[0.0; 16]).unwrap(), 1e-14)
        .unwrap()
        .sigma_max()
        .unwrap();
    let lr = 1.0 / (smax * smax);
    let mut theta = p.initial_point(&mut Rng::new(0));
    let mut losses = Vec::new();
    for _ in 0..1000 {
        losses.push(p.loss(&theta));
        theta = gd_step(&p, &theta, lr).unwrap();
    }
    let fit = fit_series(&losses, None).unwrap();
    let target = 1.0 - 1.0 / (kappa * kappa);
    let pass = fit.rho <= target + 0.01 && fit.rho >= target - 0.05 && fit.r2 >= 0.99;
    outcome(
        pass,
        format!(
            "rho = {:.5} (band [{:.2}, {:.2}]), r² = {:.5}, window {:?}",
            fit.rho,
            target - 0.05,
            target + 0.01,
            fit.r2,
            fit.window
        ),
    )
}

fn criterion_4() -> Outcome {
    let kappa = 10.0;
    let p = make_linear_lsq(16, 16, kappa, 3).unwrap();
    let smax = thin_svd(&p.jacobian(&[0.0; 16]).unwrap(), 1e-14)
        .unwrap()
        .sigma_max()
        .unwrap();
    let mut theta = p.initial_point(&mut Rng::new(0));
    let bound = 1.0 - 1.0 / kappa + 1e-10;
    let mut worst_ratio = 0.0f64;
    let mut steps = 0;
    loop {
        let r0 = norm(&p.residual(&theta));
        if r0 < 1e-10 || steps == 300 {
            break;
        }
        theta = spgd_step(&p, &theta, 1.0 / smax, None).unwrap().theta;
        worst_ratio = worst_ratio.max(norm(&p.residual(&theta)) / r0);
        steps += 1;
    }
    let linear_ok = worst_ratio <= bound;

    let pde = DiscretePde::new(31, Nonlinearity::Cubic)
        .unwrap()
        .with_sine_root(5.0, 1e-10)
        .unwrap();
    let root = pde.reference_solution().unwrap();
    let root_res = norm(&pde.residual(&root));
    let svd = thin_svd(&pde.jacobian(&root).unwrap(), 1e-14).unwrap();
    let (smin, smax) = (svd.sigma_min().unwrap(), svd.sigma_max().unwrap());
    let alpha = 1.0 / smax;
    let mut theta = pde.initial_point(&mut Rng::new(0));
    let start_dist = diff_norm(&theta, &root);
    let mut res = Vec::new();
    for _ in 0..600 {
        res.push(norm(&pde.residual(&theta)));
        theta = spgd_step(&pde, &theta, alpha, None).unwrap().theta;
    }
    let fit = fit_series(&res, None).unwrap();
    let pde_bound = 1.0 - alpha * smin / 2.0 + 0.01;
    let pde_ok = fit.rho <= pde_bound && start_dist <= 0.1 + 1e-12 && root_res <= 1e-10;
    outcome(
        linear_ok && pde_ok,
        format!(
            "linear: worst ratio {worst_ratio:.6} <= {bound:.6} over {steps} steps; pde: rho = {:.6} <= {pde_bound:.6}, ‖θ₀ − θ*‖ = {start_dist:.3}, ‖F(θ*)‖ = {root_res:.1e}",
            fit.rho
        ),
    )
}

fn iterations_to(p: &dyn ResidualProblem, spgd: bool, lr: f64, cap: usize) -> Option<usize> {
    let mut theta = p.initial_point(&mut Rng::new(0));
    for it in 0..cap {
        if norm(&p.residual(&theta)) <= 1e-6 {
            return Some(it);
        }
        theta = if spgd {
            spgd_step(p, &theta, lr, None).unwrap().theta
        } else {
            gd_step(p, &theta, lr).unwrap()
        };
    }
    None
}

fn criterion_5() -> Outcome {
    let mut gd = Vec::new();
    let mut sp = Vec::new();
    for &kappa in &[10.0, 100.0] {
        let p = make_linear_lsq(16, 16, kappa, 5).unwrap();
        let smax = thin_svd(&p.jacobian(&[0.0; 16]).unwrap(), 1e-14)
            .unwrap()
            .sigma_max()
            .unwrap();
        gd.push(iterations_to(&p, false, 1.0 / (smax * smax), 5_000_000));
        sp.push(iterations_to(&p, true, 1.0 / smax, 100_000));
    }
    match (gd[0], gd[1], sp[0], sp[1]) {
        (Some(g10), Some(g100), Some(s10), Some(s100)) => {
            let gr = g100 as f64 / g10 as f64;
            let sr = s100 as f64 / s10 as f64;
            outcome(
                gr >= 50.0 && sr <= 15.0,
                format!("GD {g10} -> {g100} (ratio {gr:.1} >= 50); SPGD {s10} -> {s100} (ratio {sr:.1} <= 15)"),
            )
        }
        _ => outcome(
            false,
            format!("a run did not reach ‖F‖ <= 1e-6: gd {gd:?}, spgd {sp:?}"),
        ),
    }
}

#[derive(Default)]
struct Recorder {
    steps: Vec<StepRecord>,
}

impl Observer for Recorder {
    fn on_step(&mut self, step: &StepRecord) {
        self.steps.push(step.clone());
    }
}

fn small_regression() -> MlpRegression {
    MlpRegression::new(RegressionConfig {
        hidden: vec![8, 8],
        batch: 64,
        test_size: 64,
        ..RegressionConfig::default()
    })
    .unwrap()
}

fn amsgrad_hyper() -> HyperParams {
    HyperParams {
        alpha: 1e-2,
        schedule: StaircaseSchedule::new(0.7, 50, 1e-5).unwrap(),
        ..HyperParams::default()
    }
}

fn criterion_6() -> Outcome {
    let mut p = small_regression();
    let hyper = amsgrad_hyper();
    let mut rec = Recorder::default();
    let trace = run(&mut p, Method::SpgdAmsgrad, &hyper, 200, 7, &mut rec).unwrap();
    let s = &rec.steps;
    if trace.diverged || s.len() != 200 {
        return outcome(
            false,
            format!(
                "run recorded {} steps, diverged = {}",
                s.len(),
                trace.diverged
            ),
        );
    }
    let (b1, eps) = (hyper.beta1, hyper.eps);
    let c = b1 / (1.0 - b1);

    // t = 1, with θ₀ = θ₁: z₂ − z₁ = (1 + c)(θ₂ − θ₁)
    let first: Vec<f64> = (0..s[0].lambda.len())
        .map(|i| {
            let a1 = s[0].lr / (s[0].v_hat[i] + eps).sqrt();
            (1.0 + c) * (s[0].theta_after[i] - s[0].theta_before[i]) + a1 * s[0].lambda[i]
        })
        .collect();
    let first_err = norm(&first);
    let lib_first = z_identity_first_step(
        &s[0].theta_before,
        &s[0].theta_after,
        &s[0].lambda,
        &s[0].v_hat,
        s[0].lr,
        b1,
        eps,
    );

    let mut worst = 0.0f64;
    let mut lib_gap = 0.0f64;
    for w in s.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let z = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + c * (x - y)).collect()
        };
        let z_t = z(&cur.theta_before, &prev.theta_before);
        let z_next = z(&cur.theta_after, &cur.theta_before);
        let resid: Vec<f64> = (0..z_t.len())
            .map(|i| {
                let a_prev = prev.lr / (cur.v_hat_prev[i] + eps).sqrt();
                let a = cur.lr / (cur.v_hat[i] + eps).sqrt();
                (z_next[i] - z_t[i]) - (c * (a_prev - a) * cur.m_prev[i] - a * cur.lambda[i])
            })
            .collect();
        let r = norm(&resid);
        worst = worst.max(r / (1.0 + norm(&cur.theta_before)));
        let lib = z_identity_residual(
            &ZStep {
                t: cur.t,
                theta_prev: &prev.theta_before,
                theta: &cur.theta_before,
                theta_next: &cur.theta_after,
                m_prev: &cur.m_prev,
                lambda: &cur.lambda,
                v_hat_prev: &cur.v_hat_prev,
                v_hat: &cur.v_hat,
                lr_prev: prev.lr,
                lr: cur.lr,
            },
            b1,
            eps,
        )
        .unwrap();
        lib_gap = lib_gap.max((lib - r).abs());
    }
    let lr_changes = s.windows(2).filter(|w| w[0].lr != w[1].lr).count();
    outcome(
        worst <= 1e-10 && first_err <= 1e-12 && lib_first <= 1e-12 && lib_gap <= 1e-12,
        format!(
            "worst residual/(1+‖θ‖) = {worst:.2e} over t = 2..200 ({lr_changes} lr changes); ‖z₂−z₁+A₁λ₁‖ = {first_err:.2e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut p = small_regression();
    let hyper = amsgrad_hyper();
    let mut rec = Recorder::default();
    let trace = run(&mut p, Method::SpgdAmsgrad, &hyper, 1000, 11, &mut rec).unwrap();
    if trace.diverged || rec.steps.len() != 1000 {
        return outcome(
            false,
            format!(
                "run recorded {} steps, diverged = {}",
                rec.steps.len(),
                trace.diverged
            ),
        );
    }
    let mut monotone = true;
    let mut bound = true;
    let mut direct = true;
    let mut max_lambda = 0.0f64;
    for s in &rec.steps {
        monotone &= s.v_hat.iter().zip(&s.v_hat_prev).all(|(v, vp)| v >= vp);
        max_lambda = max_lambda.max(norm_inf(&s.lambda));
        bound &= at_bound_check(&s.v_hat, max_lambda, s.lr, hyper.eps);
        // v̂ is a convex combination of past λ², so it never exceeds M²
        direct &= s
            .v_hat
            .iter()
            .all(|v| *v <= max_lambda * max_lambda * (1.0 + 1e-12));
    }
    outcome(
        monotone && bound && direct,
        format!("1000 steps: v̂ non-decreasing = {monotone}, bound holds every step = {bound} (direct v̂ <= M² = {direct})"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = Rng::new(808);
    let mut sym = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut null = 0.0f64;
    for _ in 0..100 {
        let k = 2 + rng.index(7);
        let w: Vec<f64> = (0..k).map(|_| rng.uniform() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut c = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            let col = fisher_block_apply(&p, &e);
            for i in 0..k {
                c[(i, j)] = col[i];
            }
        }
        sym = sym.max((&c - c.transpose()).abs().max());
        min_eig = min_eig.min(c.clone().symmetric_eigen().eigenvalues.min());
        null = null.max(norm_inf(&fisher_block_apply(&p, &vec![1.0; k])));
    }

    let (b, k) = (4, 3);
    let mut probs = Vec::new();
    for _ in 0..b {
        let w: Vec<f64> = (0..k).map(|_| rng.uniform() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        probs.extend(w.iter().map(|x| x / total));
    }
    let blocks = FisherBlocks::new(k, probs.clone()).unwrap();
    let mut dense = DMatrix::zeros(b * k, b * k);
    for blk in 0..b {
        let p = &probs[blk * k..(blk + 1) * k];
        for i in 0..k {
            for j in 0..k {
                let d = if i == j { p[i] } else { 0.0 };
                dense[(blk * k + i, blk * k + j)] = d - p[i] * p[j];
            }
        }
    }
    let mut block_err = 0.0f64;
    for _ in 0..10 {
        let u = rng.normal_vec(b * k);
        let expect = &dense * DVector::from_vec(u.clone());
        block_err = block_err.max(diff_norm(&blocks.apply(&u), expect.as_slice()));
    }
    outcome(
        sym <= 1e-12 && min_eig >= -1e-12 && null <= 1e-12 && block_err <= 1e-12,
        format!(
            "asymmetry {sym:.1e}, min eigenvalue {min_eig:.2e}, ‖C·1‖∞ {null:.1e}, blockwise vs dense {block_err:.1e}"
        ),
    )
}

fn central_fd(p: &dyn ResidualProblem, theta: &[f64]) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + theta[i].abs());
            x[i] = theta[i] + h;
            let up = p.loss(&x);
            x[i] = theta[i] - h;
            let down = p.loss(&x);
            x[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let problems: Vec<Box<dyn ResidualProblem>> = vec![
        Box::new(make_linear_lsq(12, 20, 10.0, 1).unwrap()),
        Box::new(
            DiscretePde::new(31, Nonlinearity::Zero)
                .unwrap()
                .with_init_radius(1.0),
        ),
        Box::new(
            DiscretePde::new(31, Nonlinearity::Cubic)
                .unwrap()
                .with_sine_root(5.0, 1e-10)
                .unwrap(),
        ),
        Box::new(
            DiscretePde::new(31, Nonlinearity::Bratu(1.0))
                .unwrap()
                .with_sine_root(0.1, 1e-10)
                .unwrap(),
        ),
        Box::new(MlpRegression::new(RegressionConfig::default()).unwrap()),
        Box::new(
            PoissonCollocation::new(PoissonConfig {
                hidden: vec![8, 8],
                ..PoissonConfig::default()
            })
            .unwrap(),
        ),
        Box::new(SoftmaxToy::new(SoftmaxConfig::default()).unwrap()),
    ];
    let mut lines = Vec::new();
    let mut pass = true;
    for p in &problems {
        let mut worst = 0.0f64;
        for seed in 0..5 {
            let theta = p.initial_point(&mut Rng::new(900 + seed));
            let g = p.loss_gradient(&theta);
            let fd = central_fd(p.as_ref(), &theta);
            let scale = norm(&g).max(norm(&fd));
            worst = worst.max(if scale == 0.0 {
                0.0
            } else {
                diff_norm(&g, &fd) / scale
            });
        }
        pass &= worst <= 1e-5;
        lines.push(format!("{} {worst:.1e}", p.name()));
    }
    outcome(
        pass,
        format!("worst relative gap per problem: {}", lines.join(", ")),
    )
}

fn first_below(t: &Trace, tau: f64) -> Option<usize> {
    t.rows
        .iter()
        .position(|r| r.eval_loss.is_some_and(|e| e <= tau))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_10() -> Outcome {
    let cfg = RunConfig::load(&configs_dir().join("sine1d.toml")).unwrap();
    let ok_protocol = cfg.run.epochs == 3000
        && cfg.run.seeds.len() == 10
        && cfg.method.contains_key(&Method::SpgdAdam)
        && cfg.method.contains_key(&Method::AdamBaseline);
    let traces = run_cells(&cfg, &mut |_| {}).unwrap();
    let by_method = |m: Method| -> BTreeMap<u64, &Trace> {
        traces
            .iter()
            .filter(|t| t.method == m)
            .map(|t| (t.seed, t))
            .collect()
    };
    let (sp, ad) = (by_method(Method::SpgdAdam), by_method(Method::AdamBaseline));
    let final_of = |ts: &BTreeMap<u64, &Trace>| -> Vec<f64> {
        ts.values()
            .map(|t| {
                if t.diverged {
                    f64::INFINITY
                } else {
                    t.final_eval_loss().unwrap_or(f64::INFINITY)
                }
            })
            .collect()
    };
    let epochs_of = |ts: &BTreeMap<u64, &Trace>| -> Vec<f64> {
        ts.values()
            .map(|t| first_below(t, 1e-3).map_or(f64::INFINITY, |e| e as f64))
            .collect()
    };
    let (sp_final, ad_final) = (median(final_of(&sp)), median(final_of(&ad)));
    let (sp_epoch, ad_epoch) = (median(epochs_of(&sp)), median(epochs_of(&ad)));
    // per seed: spgd-adam reaches 1e-3, and before adam-baseline does
    let wins = sp
        .iter()
        .filter(
            |(seed, t)| match (first_below(t, 1e-3), first_below(ad[seed], 1e-3)) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => true,
                _ => false,
            },
        )
        .count();
    let pass = ok_protocol && sp_final <= ad_final && sp_epoch < ad_epoch && wins >= 8;
    outcome(
        pass,
        format!(
            "median final test MSE spgd-adam {sp_final:.3e} vs adam {ad_final:.3e}; median epochs to 1e-3 {sp_epoch} vs {ad_epoch}; spgd-adam reached 1e-3 first in {wins}/10 seeds"
        ),
    )
}

fn csv_without_wall_ms(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let skip = header.iter().position(|h| *h == "wall_ms");
    std::iter::once(header.join(","))
        .chain(lines.map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        }))
        .collect()
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(csv_files(&path));
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for name in ["linear", "pde", "sine1d", "poisson", "softmax"] {
        let config = configs_dir().join(format!("{name}.toml"));
        let mut dirs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{name}-{rep}"));
            let code = main_with_args([
                "spgd",
                "compare",
                "--quiet",
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seeds",
                "0,1",
                "--epochs",
                "25",
            ]);
            if code != EXIT_OK {
                mismatches.push(format!("{name}: exit code {code}"));
            }
            dirs.push(out);
        }
        let (a, b) = (csv_files(&dirs[0]), csv_files(&dirs[1]));
        if a.is_empty() || a.len() != b.len() {
            mismatches.push(format!("{name}: {} vs {} csv files", a.len(), b.len()));
            continue;
        }
        for (fa, fb) in a.iter().zip(&b) {
            compared += 1;
            if fa.strip_prefix(&dirs[0]).unwrap() != fb.strip_prefix(&dirs[1]).unwrap()
                || csv_without_wall_ms(fa) != csv_without_wall_ms(fb)
            {
                mismatches.push(fa.display().to_string());
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{compared} csv files compared across 5 configs, mismatches: {mismatches:?}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [(u32, Duration, fn() -> Outcome); 11] = [
        (1, Duration::from_secs(1), criterion_1),
        (2, Duration::from_secs(5), criterion_2),
        (3, Duration::from_secs(5), criterion_3),
        (4, Duration::from_secs(10), criterion_4),
        (5, Duration::from_secs(30), criterion_5),
        (6, Duration::from_secs(5), criterion_6),
        (7, Duration::from_secs(5), criterion_7),
        (8, Duration::from_secs(1), criterion_8),
        (9, Duration::from_secs(10), criterion_9),
        (10, Duration::from_secs(600), criterion_10),
        (11, Duration::MAX, criterion_11),
    ];
    let mut failed = Vec::new();
    for (id, budget, check) in criteria {
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = out.pass && in_time;
        let limit = if budget == Duration::MAX {
            String::new()
        } else {
            format!(" (limit {:.0?})", budget)
        };
        // straight to the stream, so the lines show up without --nocapture
        let line = format!(
            "criterion {id:>2}: {} | {} | {:.2?}{limit}{}\n",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took,
            if in_time { "" } else { " over budget" }
        );
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
