// Softmax classification with the cross-entropy curvature operator
// Jᵀ C J + δI, where C stacks the per-sample blocks diag(p) − ppᵀ.

use spgd::optim::{run, HyperParams, Method, NoObserver};
use spgd::precond::{FisherBlocks, PrecondSpec};
use spgd::problems::{ResidualProblem, SoftmaxConfig, SoftmaxToy};
use spgd::rng::Rng;

pub fn run_example() -> spgd::Result<()> {
    let cfg = SoftmaxConfig::default();
    let probe = SoftmaxToy::new(cfg.clone())?;
    let theta0 = probe.initial_point(&mut Rng::new(0));
    let (k, probs) = probe.class_probs(&theta0).unwrap();
    let blocks = FisherBlocks::new(k, probs)?;
    // each block annihilates the all-ones vector
    let ones = vec![1.0; blocks.batch() * k];
    let worst = blocks
        .apply(&ones)
        .iter()
        .fold(0.0f64, |a, x| a.max(x.abs()));
    println!(
        "{} samples, {} classes, max |C 1| = {worst:.1e}",
        blocks.batch(),
        k
    );

    let cells = [
        (Method::AdamBaseline, HyperParams::default()),
        (
            Method::SpgdAdam,
            HyperParams {
                precond: PrecondSpec::cross_entropy(1e-5, 10),
                ..HyperParams::default()
            },
        ),
    ];
    for (method, hyper) in cells {
        let mut problem = SoftmaxToy::new(cfg.clone())?;
        let trace = run(&mut problem, method, &hyper, 150, 0, &mut NoObserver)?;
        println!(
            "{:<14} cross-entropy {:.4} -> {:.4}, accuracy {:.3}",
            method.as_str(),
            trace.rows[0].loss,
            trace.final_loss().unwrap(),
            problem.accuracy(&trace.theta)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> spgd::Result<()> {
    run_example()
}
