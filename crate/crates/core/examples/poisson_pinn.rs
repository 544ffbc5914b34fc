// Collocation training for Δu = 4 in the unit disc with u = 1 on the
// boundary. The evaluation loss is the relative L² error against |x|².

use spgd::optim::{run, HyperParams, Method, NoObserver};
use spgd::problems::{PoissonCollocation, PoissonConfig};

pub fn run_example() -> spgd::Result<()> {
    let cfg = PoissonConfig {
        hidden: vec![8, 8],
        n_interior: 128,
        n_boundary: 64,
        test_size: 512,
        ..PoissonConfig::default()
    };
    let hyper = HyperParams {
        alpha: 3e-3,
        ..HyperParams::default()
    };
    for method in [Method::AdamBaseline, Method::SpgdAdam] {
        let mut problem = PoissonCollocation::new(cfg.clone())?;
        let trace = run(&mut problem, method, &hyper, 60, 0, &mut NoObserver)?;
        let first = &trace.rows[0];
        let last = trace.rows.last().unwrap();
        println!(
            "{:<14} loss {:.3e} -> {:.3e}   rel. L2 error {:.3} -> {:.3}",
            method.as_str(),
            first.loss,
            last.loss,
            first.eval_loss.unwrap(),
            last.eval_loss.unwrap()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> spgd::Result<()> {
    run_example()
}
