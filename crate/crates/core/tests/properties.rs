use proptest::prelude::*;
use spgd::diagnostics::milestones;
use spgd::linalg::{dot, norm, thin_svd, Matrix};
use spgd::optim::StaircaseSchedule;
use spgd::precond::{
    damped_apply_dense, damped_apply_lanczos, fisher_block_apply, spgd_direction, PrecondSpec,
};

fn matrix(max_dim: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0..3.0f64, r * c)
            .prop_map(move |d| Matrix::from_row_major(r, c, d).unwrap())
    })
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..1.0f64, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs(a in matrix(12)) {
        let s = thin_svd(&a, 0.0).unwrap();
        let err = s.reconstruct().sub(&a).frobenius_norm();
        prop_assert!(err <= 1e-10 * (1.0 + a.frobenius_norm()), "err {err}");
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    // VUᵀ is a partial isometry: it never lengthens F
    #[test]
    fn spgd_direction_is_nonexpansive(a in matrix(12), seed in any::<u64>()) {
        let s = thin_svd(&a, 1e-12).unwrap();
        let mut rng = spgd::rng::Rng::new(seed);
        let f = rng.normal_vec(a.rows());
        let d = spgd_direction(&s, &f).unwrap();
        prop_assert!(norm(&d) <= norm(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn full_depth_lanczos_matches_dense(a in matrix(10), seed in any::<u64>(), p in prop::sample::select(vec![0.5, 1.0])) {
        let mut rng = spgd::rng::Rng::new(seed);
        let g = rng.normal_vec(a.cols());
        let mu = 1e-1;
        let dense = damped_apply_dense(&a, &g, mu, p).unwrap();
        let spec = PrecondSpec { p, ..PrecondSpec::damped_lanczos(mu, a.cols()) };
        let lz = damped_apply_lanczos(&a, &g, &spec).unwrap();
        let gap: f64 = dense.iter().zip(&lz).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(gap <= 1e-8 * norm(&dense), "gap {gap}");
    }

    #[test]
    fn fisher_block_is_psd(p in (2usize..8).prop_flat_map(simplex), seed in any::<u64>()) {
        let mut rng = spgd::rng::Rng::new(seed);
        let u = rng.normal_vec(p.len());
        prop_assert!(dot(&u, &fisher_block_apply(&p, &u)) >= -1e-12);
    }

    #[test]
    fn staircase_is_monotone_and_floored(
        factor in 0.05..1.0f64,
        interval in 1usize..200,
        floor in 0.0..1e-3f64,
        alpha in 1e-3..1.0f64,
    ) {
        let s = StaircaseSchedule::new(factor, interval, floor).unwrap();
        let mut prev = f64::INFINITY;
        for epoch in (0..3000).step_by(37) {
            let lr = s.lr_at(alpha, epoch);
            prop_assert!(lr <= prev && lr >= floor.min(alpha));
            prev = lr;
        }
    }

    // tighter thresholds are never reached earlier
    #[test]
    fn milestones_are_ordered(values in prop::collection::vec(1e-8..10.0f64, 1..200)) {
        let m = milestones(&values, &[1.0, 1e-2, 1e-4]).unwrap();
        let epochs: Vec<usize> = m.iter().map(|(_, e)| e.unwrap_or(usize::MAX)).collect();
        prop_assert!(epochs.windows(2).all(|w| w[0] <= w[1]));
    }
}
