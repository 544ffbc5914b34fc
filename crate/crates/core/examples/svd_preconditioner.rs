// GD against SPGD on linear least squares as the condition number grows.
// GD needs about κ² iterations, SPGD about κ.

use spgd::linalg::{norm, thin_svd};
use spgd::optim::{gd_step, spgd_step};
use spgd::precond::{precond_gradient_exact, spgd_direction};
use spgd::problems::{make_linear_lsq, ResidualProblem};
use spgd::rng::Rng;

fn iterations(p: &dyn ResidualProblem, lr: f64, spgd: bool) -> spgd::Result<usize> {
    let mut theta = p.initial_point(&mut Rng::new(0));
    let mut it = 0;
    while norm(&p.residual(&theta)) > 1e-6 {
        theta = if spgd {
            spgd_step(p, &theta, lr, None)?.theta
        } else {
            gd_step(p, &theta, lr)?
        };
        it += 1;
    }
    Ok(it)
}

pub fn run_example() -> spgd::Result<()> {
    println!("{:>6} {:>10} {:>10}", "kappa", "gd iters", "spgd iters");
    for kappa in [2.0, 10.0, 30.0] {
        let p = make_linear_lsq(16, 24, kappa, 1)?;
        let svd = thin_svd(&p.a, 1e-14)?;
        let smax = svd.sigma_max().unwrap();

        // the two ways of writing the step agree
        let theta = p.initial_point(&mut Rng::new(4));
        let d = spgd_direction(&svd, &p.residual(&theta))?;
        let b = precond_gradient_exact(&svd, &p.loss_gradient(&theta))?;
        let gap = norm(&spgd::linalg::sub(&d, &b));
        assert!(gap < 1e-10 * norm(&p.residual(&theta)));

        let gd = iterations(&p, 1.0 / (smax * smax), false)?;
        let sp = iterations(&p, 1.0 / smax, true)?;
        println!("{kappa:>6} {gd:>10} {sp:>10}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> spgd::Result<()> {
    run_example()
}
