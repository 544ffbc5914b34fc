// Matrix-free (JᵀJ + μI)^{-1/2} g by Lanczos, against the dense
// eigendecomposition, for increasing Krylov depth.

use spgd::linalg::{norm, sub, Matrix};
use spgd::precond::{damped_apply_dense, damped_apply_lanczos, PrecondSpec};
use spgd::rng::Rng;

pub fn run_example() -> spgd::Result<()> {
    let mut rng = Rng::new(7);
    let (n, m) = (60, 24);
    // columns with decaying scale so the spectrum is spread out
    let mut data = rng.normal_vec(n * m);
    for row in data.chunks_mut(m) {
        for (j, x) in row.iter_mut().enumerate() {
            *x *= 0.8f64.powi(j as i32);
        }
    }
    let j = Matrix::from_row_major(n, m, data)?;
    let g = rng.normal_vec(m);
    let mu = 1e-3;

    let exact = damped_apply_dense(&j, &g, mu, 0.5)?;
    println!("{:>3} {:>12}", "k", "rel. error");
    for k in [1, 2, 4, 8, 12, 16, 24] {
        let approx = damped_apply_lanczos(&j, &g, &PrecondSpec::damped_lanczos(mu, k))?;
        println!(
            "{k:>3} {:>12.3e}",
            norm(&sub(&approx, &exact)) / norm(&exact)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> spgd::Result<()> {
    run_example()
}
