use super::matrix::{dot, Matrix};
use crate::rng::Rng;

/// A linear operator accessed only through products with `A` and `Aᵀ`.
pub trait LinearMap {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
    fn apply_adjoint(&self, u: &[f64]) -> Vec<f64>;
}

impl LinearMap for Matrix {
    fn in_dim(&self) -> usize {
        self.cols()
    }

    fn out_dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matvec(v)
    }

    fn apply_adjoint(&self, u: &[f64]) -> Vec<f64> {
        self.matvec_t(u)
    }
}

/// Self-adjoint operator given by a closure, e.g. `v ↦ Jᵀ(J v)`.
pub struct SymmetricFn<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> SymmetricFn<F> {
    pub fn new(dim: usize, f: F) -> Self {
        SymmetricFn { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> LinearMap for SymmetricFn<F> {
    fn in_dim(&self) -> usize {
        self.dim
    }

    fn out_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (self.f)(v)
    }

    fn apply_adjoint(&self, u: &[f64]) -> Vec<f64> {
        (self.f)(u)
    }
}

/// Largest relative adjoint mismatch `|<Av,u> − <v,Aᵀu>| / (‖Av‖‖u‖ + ‖v‖‖Aᵀu‖)`
/// over `probes` random Gaussian pairs.
pub fn adjoint_mismatch(op: &dyn LinearMap, rng: &mut Rng, probes: usize) -> f64 {
    (0..probes)
        .map(|_| {
            let v = rng.normal_vec(op.in_dim());
            let u = rng.normal_vec(op.out_dim());
            let av = op.apply(&v);
            let atu = op.apply_adjoint(&u);
            let lhs = dot(&av, &u);
            let rhs = dot(&v, &atu);
            let scale = super::norm(&av) * super::norm(&u) + super::norm(&v) * super::norm(&atu);
            if scale == 0.0 {
                0.0
            } else {
                (lhs - rhs).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}
