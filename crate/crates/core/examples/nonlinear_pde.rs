// SPGD near a root of the discretised u'' + u³ = 0. The fitted residual
// rate is compared with 1 − α σ_min from the Jacobian at the root.

use spgd::diagnostics::{fit_series, spectral_probe};
use spgd::linalg::{norm, sub};
use spgd::optim::spgd_step;
use spgd::problems::{DiscretePde, Nonlinearity, ResidualProblem};
use spgd::rng::Rng;

pub fn run_example() -> spgd::Result<()> {
    let pde = DiscretePde::new(31, Nonlinearity::Cubic)?.with_sine_root(5.0, 1e-10)?;
    let root = pde.reference_solution().unwrap();
    let peak = root.iter().cloned().fold(0.0, f64::max);
    let probe = spectral_probe(&pde, &root, None)?;
    println!(
        "root peak {peak:.6}, sigma_min {:.3}, sigma_max {:.1}, kappa {:.1}",
        probe.sigma_min, probe.sigma_max, probe.kappa
    );

    let alpha = 1.0 / probe.sigma_max;
    let mut theta = pde.initial_point(&mut Rng::new(1));
    let mut res = Vec::new();
    for t in 0..400 {
        res.push(norm(&pde.residual(&theta)));
        if t % 100 == 0 {
            println!(
                "step {t:>4}  |F| {:.3e}  |theta - root| {:.3e}",
                res[t],
                norm(&sub(&theta, &root))
            );
        }
        theta = spgd_step(&pde, &theta, alpha, None)?.theta;
    }
    let fit = fit_series(&res, None)?;
    println!(
        "fitted rate {:.5} (r² {:.4}); linearised prediction {:.5}",
        fit.rho,
        fit.r2,
        1.0 - alpha * probe.sigma_min
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> spgd::Result<()> {
    run_example()
}
