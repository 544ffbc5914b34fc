use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::precond::PrecondKind;
use crate::problems::ResidualProblem;
use crate::rng::Rng;

use super::steps::{adam_update, gd_update, moment_step, spgd_step};
use super::{HyperParams, Method, OptimizerState};

/// One recorded epoch, measured at `θ_t` before that epoch's step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// `√(2 f)`; equals `‖F‖` for least-squares losses.
    pub residual_norm: f64,
    pub lr: f64,
    pub wall_ms: f64,
    pub eval_loss: Option<f64>,
    /// Extreme retained singular values of `J_F`, when the step computed them.
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
}

/// Everything a moment-based step touched, indexed by the 1-based step `t`
/// that maps `θ_t` to `θ_{t+1}`.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub t: usize,
    pub theta_before: Vec<f64>,
    pub theta_after: Vec<f64>,
    pub lambda: Vec<f64>,
    pub m_prev: Vec<f64>,
    pub m: Vec<f64>,
    pub v_hat_prev: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub lr: f64,
}

pub trait Observer {
    fn on_row(&mut self, _row: &TraceRow) {}
    fn on_step(&mut self, _step: &StepRecord) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

#[derive(Clone, Debug)]
pub struct Trace {
    pub method: Method,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    /// Set when the loss went non-finite or a step failed numerically.
    pub diverged: bool,
    pub failure: Option<String>,
    /// Parameters after the last completed step.
    pub theta: Vec<f64>,
}

impl Trace {
    pub fn final_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.loss)
    }

    pub fn final_eval_loss(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.eval_loss)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }
}

/// Trains `problem` for `epochs` steps from an initial point drawn with
/// `seed`. Stochastic problems redraw their batch at the start of every
/// epoch from the same generator. A non-finite loss or a failed step ends
/// the run early with `diverged` set; only invalid arguments are errors.
pub fn run(
    problem: &mut dyn ResidualProblem,
    method: Method,
    hyper: &HyperParams,
    epochs: usize,
    seed: u64,
    observer: &mut dyn Observer,
) -> Result<Trace> {
    if epochs == 0 {
        return Err(Error::input("run: epochs must be >= 1"));
    }
    hyper.validate_for(method)?;
    let mut rng = Rng::new(seed);
    let theta0 = problem.initial_point(&mut rng);
    if matches!(method, Method::SpgdAdam | Method::SpgdAmsgrad)
        && hyper.precond.kind == PrecondKind::CrossEntropyLanczos
        && problem.class_probs(&theta0).is_none()
    {
        return Err(Error::config(format!(
            "cross-entropy preconditioner needs a classification problem; {} is not one",
            problem.name()
        )));
    }

    let start = Instant::now();
    let mut state = OptimizerState::new(theta0);
    let mut trace = Trace {
        method,
        seed,
        rows: Vec::with_capacity(epochs),
        diverged: false,
        failure: None,
        theta: Vec::new(),
    };

    for epoch in 0..epochs {
        if problem.is_stochastic() {
            problem.resample(&mut rng);
        }
        let (loss, grad) = problem.loss_and_gradient(&state.theta);
        if !loss.is_finite() {
            trace.diverged = true;
            trace.failure = Some(format!("epoch {epoch}: loss is not finite"));
            break;
        }
        let grad_norm = norm(&grad);
        let lr = hyper.lr_at(epoch);
        let mut row = TraceRow {
            epoch,
            loss,
            grad_norm,
            residual_norm: (2.0 * loss).sqrt(),
            lr,
            wall_ms: 0.0,
            eval_loss: problem.eval_loss(&state.theta),
            sigma_min: None,
            sigma_max: None,
        };

        let p: &dyn ResidualProblem = &*problem;
        let stepped = match method {
            Method::Gd => gd_update(&state.theta, &grad, lr).map(|th| {
                state.theta = th;
                state.t += 1;
            }),
            Method::Spgd => spgd_step(p, &state.theta, lr, hyper.precond.trunc_tol).map(|s| {
                row.sigma_min = Some(s.sigma_min);
                row.sigma_max = Some(s.sigma_max);
                state.theta = s.theta;
                state.t += 1;
            }),
            Method::SpgdAdam | Method::SpgdAmsgrad | Method::AdamBaseline => {
                let before = state.theta.clone();
                let out = match method {
                    Method::SpgdAdam => moment_step(p, &mut state, hyper, false, Some(grad)),
                    // validate_for has already enforced β₁ < √β₂
                    Method::SpgdAmsgrad => moment_step(p, &mut state, hyper, true, Some(grad)),
                    _ => adam_update(&mut state, hyper, grad),
                };
                out.map(|o| {
                    observer.on_step(&StepRecord {
                        t: state.t,
                        theta_before: before,
                        theta_after: state.theta.clone(),
                        lambda: o.lambda,
                        m_prev: o.m_prev,
                        m: state.m.clone(),
                        v_hat_prev: o.v_hat_prev,
                        v_hat: state.v_hat.clone(),
                        lr: o.lr,
                    })
                })
            }
        };

        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        observer.on_row(&row);
        trace.rows.push(row);
        if let Err(e) = stepped {
            log::debug!("{method} seed {seed} stopped: {e}");
            trace.diverged = true;
            trace.failure = Some(e.to_string());
            break;
        }
    }
    trace.theta = state.theta;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::thin_svd;
    use crate::optim::StaircaseSchedule;
    use crate::precond::PrecondSpec;
    use crate::problems::{make_linear_lsq, MlpRegression, RegressionConfig};

    #[test]
    fn one_epoch_gives_one_row_and_zero_is_rejected() {
        let mut p = make_linear_lsq(3, 4, 2.0, 0).unwrap();
        let h = HyperParams::with_alpha(0.1);
        let t = run(&mut p, Method::Gd, &h, 1, 0, &mut NoObserver).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].epoch, 0);
        assert!(run(&mut p, Method::Gd, &h, 0, 0, &mut NoObserver).is_err());
    }

    #[test]
    fn rows_satisfy_loss_residual_relation() {
        let mut p = make_linear_lsq(4, 6, 3.0, 1).unwrap();
        let t = run(
            &mut p,
            Method::Spgd,
            &HyperParams::with_alpha(0.1),
            10,
            2,
            &mut NoObserver,
        )
        .unwrap();
        for r in &t.rows {
            assert!((r.loss - 0.5 * r.residual_norm.powi(2)).abs() <= 1e-9 * r.loss.max(1e-300));
            assert!(r.sigma_min.unwrap() > 0.0);
        }
    }

    fn strip_time(t: &Trace) -> Vec<TraceRow> {
        t.rows
            .iter()
            .map(|r| TraceRow {
                wall_ms: 0.0,
                ..r.clone()
            })
            .collect()
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = RegressionConfig {
            hidden: vec![4],
            batch: 16,
            test_size: 32,
            ..RegressionConfig::default()
        };
        let h = HyperParams::default();
        let traces: Vec<Vec<TraceRow>> = (0..2)
            .map(|_| {
                let mut p = MlpRegression::new(cfg.clone()).unwrap();
                strip_time(&run(&mut p, Method::SpgdAdam, &h, 8, 42, &mut NoObserver).unwrap())
            })
            .collect();
        assert_eq!(traces[0], traces[1]);
        let mut p = MlpRegression::new(cfg).unwrap();
        let other = strip_time(&run(&mut p, Method::SpgdAdam, &h, 8, 43, &mut NoObserver).unwrap());
        assert_ne!(traces[0], other);
    }

    #[test]
    fn gd_loss_ratio_respects_quadratic_rate() {
        let mut p = make_linear_lsq(8, 8, 10.0, 5).unwrap();
        let svd = thin_svd(&p.a, 0.0).unwrap();
        let (smin, smax) = (svd.sigma_min().unwrap(), svd.sigma_max().unwrap());
        let h = HyperParams::with_alpha(1.0 / (smax * smax));
        let t = run(&mut p, Method::Gd, &h, 400, 0, &mut NoObserver).unwrap();
        let bound = 1.0 - smin * smin / (smax * smax) + 1e-10;
        // monotone once the top modes have been removed
        for w in t.rows[50..].windows(2) {
            if w[1].loss > 1e-26 {
                assert!(w[1].loss / w[0].loss <= bound);
            }
        }
    }

    #[test]
    fn blow_up_is_recorded_not_raised() {
        let mut p = make_linear_lsq(3, 3, 5.0, 2).unwrap();
        let h = HyperParams::with_alpha(1e3);
        let t = run(&mut p, Method::Gd, &h, 500, 0, &mut NoObserver).unwrap();
        assert!(t.diverged);
        assert!(t.rows.len() < 500);
        assert!(t.rows.iter().all(|r| r.loss.is_finite()));
    }

    #[test]
    fn amsgrad_config_error_surfaces() {
        let mut p = make_linear_lsq(3, 3, 5.0, 2).unwrap();
        let h = HyperParams {
            beta1: 0.99,
            beta2: 0.5,
            ..HyperParams::default()
        };
        assert!(matches!(
            run(&mut p, Method::SpgdAmsgrad, &h, 5, 0, &mut NoObserver),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn cross_entropy_precond_needs_probabilities() {
        let mut p = make_linear_lsq(3, 3, 5.0, 2).unwrap();
        let h = HyperParams {
            precond: PrecondSpec::cross_entropy(1e-4, 5),
            ..HyperParams::default()
        };
        assert!(matches!(
            run(&mut p, Method::SpgdAdam, &h, 5, 0, &mut NoObserver),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn observer_sees_every_moment_step() {
        struct Count(usize, usize);
        impl Observer for Count {
            fn on_row(&mut self, _: &TraceRow) {
                self.0 += 1;
            }
            fn on_step(&mut self, s: &StepRecord) {
                self.1 += 1;
                assert_eq!(s.t, self.1);
            }
        }
        let mut p = make_linear_lsq(3, 5, 5.0, 2).unwrap();
        let h = HyperParams {
            schedule: StaircaseSchedule::new(0.5, 2, 0.0).unwrap(),
            precond: PrecondSpec::exact_svd(),
            ..HyperParams::default()
        };
        let mut c = Count(0, 0);
        run(&mut p, Method::SpgdAmsgrad, &h, 7, 1, &mut c).unwrap();
        assert_eq!((c.0, c.1), (7, 7));
    }
}
