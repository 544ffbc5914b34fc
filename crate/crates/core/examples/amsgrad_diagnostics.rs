// Watching an SPGD-AMSGrad run step by step: the auxiliary-sequence
// identity, monotone second moments, the uniform bound on the step
// sizes and the growth exponent of the preconditioned gradients.

use spgd::diagnostics::{at_bound_check, growth_exponent, z_identity_residual, ZStep};
use spgd::linalg::norm_inf;
use spgd::optim::{run, HyperParams, Method, Observer, StaircaseSchedule, StepRecord};
use spgd::problems::{MlpRegression, RegressionConfig};

#[derive(Default)]
struct Watch {
    steps: Vec<StepRecord>,
}

impl Observer for Watch {
    fn on_step(&mut self, s: &StepRecord) {
        self.steps.push(s.clone());
    }
}

pub fn run_example() -> spgd::Result<()> {
    let mut problem = MlpRegression::new(RegressionConfig {
        hidden: vec![8, 8],
        batch: 64,
        test_size: 256,
        ..Default::default()
    })?;
    let hyper = HyperParams {
        schedule: StaircaseSchedule::new(0.5, 100, 1e-5)?,
        ..HyperParams::default()
    };
    let mut watch = Watch::default();
    let trace = run(
        &mut problem,
        Method::SpgdAmsgrad,
        &hyper,
        300,
        3,
        &mut watch,
    )?;

    let mut worst_z = 0.0f64;
    let mut monotone = true;
    let mut bound = true;
    let mut m = 0.0f64;
    for (i, s) in watch.steps.iter().enumerate() {
        monotone &= s.v_hat.iter().zip(&s.v_hat_prev).all(|(a, b)| a >= b);
        m = m.max(norm_inf(&s.lambda));
        bound &= at_bound_check(&s.v_hat, m, s.lr, hyper.eps);
        if i == 0 {
            continue;
        }
        let prev = &watch.steps[i - 1];
        let r = z_identity_residual(
            &ZStep {
                t: s.t,
                theta_prev: &prev.theta_before,
                theta: &s.theta_before,
                theta_next: &s.theta_after,
                m_prev: &s.m_prev,
                lambda: &s.lambda,
                v_hat_prev: &s.v_hat_prev,
                v_hat: &s.v_hat,
                lr_prev: prev.lr,
                lr: s.lr,
            },
            hyper.beta1,
            hyper.eps,
        )?;
        worst_z = worst_z.max(r);
    }
    let lambdas: Vec<Vec<f64>> = watch.steps.iter().map(|s| s.lambda.clone()).collect();
    println!("final batch loss {:.3e}", trace.final_loss().unwrap());
    println!("largest z-identity residual {worst_z:.2e}");
    println!("v_hat monotone: {monotone}, step-size bound held: {bound}");
    println!(
        "growth exponent of preconditioned gradients: {:.3}",
        growth_exponent(&lambdas)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> spgd::Result<()> {
    run_example()
}
