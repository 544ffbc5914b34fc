// A short version of the sine-regression comparison: Adam against
// SPGD-Adam with a Lanczos preconditioner, one seed.

use spgd::optim::{run, HyperParams, Method, NoObserver, StaircaseSchedule};
use spgd::precond::PrecondSpec;
use spgd::problems::{MlpRegression, RegressionConfig};

pub fn run_example() -> spgd::Result<()> {
    let cfg = RegressionConfig {
        test_size: 1024,
        ..RegressionConfig::default()
    };
    let epochs = 150;
    let cells = [
        (Method::AdamBaseline, HyperParams::default()),
        (
            Method::SpgdAdam,
            HyperParams {
                schedule: StaircaseSchedule::new(0.7, 100, 1e-5)?,
                precond: PrecondSpec::damped_lanczos(1e-5, 10),
                ..HyperParams::default()
            },
        ),
    ];
    for (method, hyper) in cells {
        let mut problem = MlpRegression::new(cfg.clone())?;
        let trace = run(&mut problem, method, &hyper, epochs, 0, &mut NoObserver)?;
        let at = |e: usize| trace.rows[e].eval_loss.unwrap();
        println!(
            "{:<14} test MSE  epoch 0: {:.2e}  epoch 50: {:.2e}  epoch {}: {:.2e}",
            method.as_str(),
            at(0),
            at(50),
            epochs - 1,
            at(epochs - 1)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> spgd::Result<()> {
    run_example()
}
