//! Preconditioners applied to the gradient: the exact SVD form `VUᵀF`
//! (equivalently `[(JᵀJ)†]^{1/2} ∇f`), the damped power `(JᵀJ + μI)^{-p}`
//! (dense or Lanczos), and the cross-entropy operator
//! `(Jᵀ C J + δI)^{-1/2}` built from softmax Fisher blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dot, lanczos, norm, sym_eig_dense, thin_svd, tridiag_func_apply, LinearMap, Matrix, SvdFactors,
};
use crate::problems::{dense_jacobian, linearize, ResidualProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondKind {
    ExactSvd,
    DampedDense,
    DampedLanczos,
    CrossEntropyLanczos,
}

/// Which preconditioner to apply and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecondSpec {
    pub kind: PrecondKind,
    /// Damping `μ` of `(JᵀJ + μI)^{-p}`.
    pub mu: f64,
    /// Exponent `p`.
    pub p: f64,
    /// Lanczos depth.
    pub k: usize,
    /// Damping `δ` of the cross-entropy operator.
    pub delta: f64,
    /// Relative singular-value cutoff for the exact path; `None` uses
    /// `max(n, m) * ε`.
    pub trunc_tol: Option<f64>,
}

impl Default for PrecondSpec {
    fn default() -> Self {
        PrecondSpec::damped_lanczos(1e-5, 10)
    }
}

impl PrecondSpec {
    pub fn exact_svd() -> Self {
        PrecondSpec {
            kind: PrecondKind::ExactSvd,
            mu: 0.0,
            p: 0.5,
            k: 10,
            delta: 1e-4,
            trunc_tol: None,
        }
    }

    pub fn damped_dense(mu: f64, p: f64) -> Self {
        PrecondSpec {
            kind: PrecondKind::DampedDense,
            mu,
            p,
            ..PrecondSpec::exact_svd()
        }
    }

    pub fn damped_lanczos(mu: f64, k: usize) -> Self {
        PrecondSpec {
            kind: PrecondKind::DampedLanczos,
            mu,
            k,
            ..PrecondSpec::exact_svd()
        }
    }

    pub fn cross_entropy(delta: f64, k: usize) -> Self {
        PrecondSpec {
            kind: PrecondKind::CrossEntropyLanczos,
            delta,
            k,
            ..PrecondSpec::exact_svd()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::config(format!(
                "precond: mu must be >= 0, got {}",
                self.mu
            )));
        }
        if !(self.p > 0.0) || !self.p.is_finite() {
            return Err(Error::config(format!(
                "precond: p must be > 0, got {}",
                self.p
            )));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::config(format!(
                "precond: delta must be >= 0, got {}",
                self.delta
            )));
        }
        if matches!(
            self.kind,
            PrecondKind::DampedLanczos | PrecondKind::CrossEntropyLanczos
        ) && self.k == 0
        {
            return Err(Error::config("precond: Lanczos depth k must be >= 1"));
        }
        if let Some(t) = self.trunc_tol {
            if !(t >= 0.0) {
                return Err(Error::config(format!(
                    "precond: trunc_tol must be >= 0, got {t}"
                )));
            }
        }
        Ok(())
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::input(format!(
            "{what}: length {got}, expected {want}"
        )));
    }
    Ok(())
}

/// `V (Uᵀ F)` over the retained singular triplets.
pub fn spgd_direction(svd: &SvdFactors, f: &[f64]) -> Result<Vec<f64>> {
    check_len("spgd_direction residual", f.len(), svd.u.rows())?;
    Ok(svd.v.matvec(&svd.u.matvec_t(f)))
}

/// `V diag(1/σ) Vᵀ g`, i.e. `[(JᵀJ)†]^{1/2} g`.
pub fn precond_gradient_exact(svd: &SvdFactors, grad: &[f64]) -> Result<Vec<f64>> {
    check_len("precond_gradient_exact gradient", grad.len(), svd.v.rows())?;
    let coef: Vec<f64> = svd
        .v
        .matvec_t(grad)
        .iter()
        .zip(&svd.sigma)
        .map(|(c, s)| c / s)
        .collect();
    Ok(svd.v.matvec(&coef))
}

/// `W diag((λᵢ + μ)^{-p}) Wᵀ g` from the eigendecomposition `JᵀJ = WΛWᵀ`.
pub fn damped_apply_dense(j: &Matrix, g: &[f64], mu: f64, p: f64) -> Result<Vec<f64>> {
    check_len("damped_apply_dense gradient", g.len(), j.cols())?;
    let eig = sym_eig_dense(&j.gram())?;
    let coeffs = eig.vectors.matvec_t(g);
    let mut scaled = Vec::with_capacity(coeffs.len());
    for (c, &lambda) in coeffs.iter().zip(&eig.values) {
        let shifted = lambda + mu;
        if !(shifted > 0.0) {
            return Err(Error::numerical(format!(
                "damped_apply_dense: eigenvalue {lambda:e} + mu {mu:e} is not positive"
            )));
        }
        scaled.push(c * shifted.powf(-p));
    }
    Ok(eig.vectors.matvec(&scaled))
}

/// `(JᵀJ + μI)^{-p} g` through `k` Lanczos steps on the unshifted operator
/// `JᵀJ`; the shift and the power are applied to the projected tridiagonal
/// matrix. A zero `g` maps to zero.
pub fn damped_apply_lanczos(
    jac: &dyn LinearMap,
    g: &[f64],
    spec: &PrecondSpec,
) -> Result<Vec<f64>> {
    check_len("damped_apply_lanczos gradient", g.len(), jac.in_dim())?;
    let g_norm = norm(g);
    if g_norm == 0.0 {
        return Ok(vec![0.0; g.len()]);
    }
    let gram = GramOperator { jac };
    let basis = lanczos(&gram, g, spec.k)?;
    let (mu, p) = (spec.mu, spec.p);
    let out = tridiag_func_apply(&basis, g_norm, |l| (l + mu).powf(-p))?;
    finite("damped_apply_lanczos", out)
}

/// `v ↦ Jᵀ(J v)`
struct GramOperator<'a> {
    jac: &'a dyn LinearMap,
}

impl LinearMap for GramOperator<'_> {
    fn in_dim(&self) -> usize {
        self.jac.in_dim()
    }

    fn out_dim(&self) -> usize {
        self.jac.in_dim()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.jac.apply_adjoint(&self.jac.apply(v))
    }

    fn apply_adjoint(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u)
    }
}

/// `C u = p∘u − p (pᵀu)` for one softmax probability vector `p`.
pub fn fisher_block_apply(p: &[f64], u: &[f64]) -> Vec<f64> {
    debug_assert_eq!(p.len(), u.len());
    let pu = dot(p, u);
    p.iter().zip(u).map(|(pi, ui)| pi * ui - pi * pu).collect()
}

/// Block-diagonal Fisher matrix `C = blockdiag(diag(pᵢ) − pᵢpᵢᵀ)`, stored
/// as its probability vectors only.
#[derive(Clone, Debug)]
pub struct FisherBlocks {
    classes: usize,
    probs: Vec<f64>,
}

impl FisherBlocks {
    /// `probs` holds `B` probability vectors of length `classes`, row-major.
    pub fn new(classes: usize, probs: Vec<f64>) -> Result<Self> {
        if classes == 0 || probs.len() % classes != 0 {
            return Err(Error::input(format!(
                "FisherBlocks: {} probabilities do not split into rows of {classes}",
                probs.len()
            )));
        }
        for (i, row) in probs.chunks(classes).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::input(format!(
                    "FisherBlocks: row {i} is not a probability vector (sum {s})"
                )));
            }
        }
        Ok(FisherBlocks { classes, probs })
    }

    pub fn batch(&self) -> usize {
        self.probs.len() / self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.probs[i * self.classes..(i + 1) * self.classes]
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(
            u.len(),
            self.probs.len(),
            "FisherBlocks::apply dimension mismatch"
        );
        self.probs
            .chunks(self.classes)
            .zip(u.chunks(self.classes))
            .flat_map(|(p, ui)| fisher_block_apply(p, ui))
            .collect()
    }
}

/// The operator `v ↦ Jᵀ C J v + δ v`.
pub struct CeOperator<'a> {
    jac: &'a dyn LinearMap,
    blocks: &'a FisherBlocks,
    delta: f64,
}

/// Builds the cross-entropy curvature operator; fails if the block layout
/// does not match the residual dimension.
pub fn ce_operator<'a>(
    jac: &'a dyn LinearMap,
    blocks: &'a FisherBlocks,
    delta: f64,
) -> Result<CeOperator<'a>> {
    check_len(
        "ce_operator probabilities",
        blocks.probs.len(),
        jac.out_dim(),
    )?;
    Ok(CeOperator { jac, blocks, delta })
}

impl LinearMap for CeOperator<'_> {
    fn in_dim(&self) -> usize {
        self.jac.in_dim()
    }

    fn out_dim(&self) -> usize {
        self.jac.in_dim()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let cjv = self.blocks.apply(&self.jac.apply(v));
        let mut out = self.jac.apply_adjoint(&cjv);
        out.iter_mut()
            .zip(v)
            .for_each(|(o, vi)| *o += self.delta * vi);
        out
    }

    fn apply_adjoint(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u)
    }
}

/// `(Jᵀ C J + δI)^{-1/2} g` by Lanczos on the damped operator.
pub fn ce_apply_lanczos(op: &CeOperator<'_>, g: &[f64], k: usize) -> Result<Vec<f64>> {
    check_len("ce_apply_lanczos gradient", g.len(), op.in_dim())?;
    let g_norm = norm(g);
    if g_norm == 0.0 {
        return Ok(vec![0.0; g.len()]);
    }
    let basis = lanczos(op, g, k)?;
    let out = tridiag_func_apply(&basis, g_norm, |l| l.powf(-0.5))?;
    finite("ce_apply_lanczos", out)
}

fn finite(what: &str, v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical(format!("{what}: non-finite direction")));
    }
    Ok(v)
}

/// Applies the configured preconditioner to the gradient `g` at `θ`.
pub fn precondition(
    problem: &dyn ResidualProblem,
    theta: &[f64],
    g: &[f64],
    spec: &PrecondSpec,
) -> Result<Vec<f64>> {
    match spec.kind {
        PrecondKind::ExactSvd => {
            let j = dense_jacobian(problem, theta)?;
            let tol = spec
                .trunc_tol
                .unwrap_or_else(|| crate::linalg::default_trunc_tol(j.rows(), j.cols()));
            let svd = thin_svd(&j, tol)?;
            precond_gradient_exact(&svd, g)
        }
        PrecondKind::DampedDense => {
            let j = dense_jacobian(problem, theta)?;
            damped_apply_dense(&j, g, spec.mu, spec.p)
        }
        PrecondKind::DampedLanczos => {
            damped_apply_lanczos(linearize(problem, theta).as_ref(), g, spec)
        }
        PrecondKind::CrossEntropyLanczos => {
            let (classes, probs) = problem.class_probs(theta).ok_or_else(|| {
                Error::config(format!(
                    "cross-entropy preconditioner needs class probabilities; {} has none",
                    problem.name()
                ))
            })?;
            let blocks = FisherBlocks::new(classes, probs)?;
            let jac = linearize(problem, theta);
            let op = ce_operator(jac.as_ref(), &blocks, spec.delta)?;
            ce_apply_lanczos(&op, g, spec.k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sub;
    use crate::rng::Rng;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_factors_pass_residual_through() {
        let svd = thin_svd(&m(&[vec![2.0, 0.0], vec![0.0, 1.0]]), 0.0).unwrap();
        assert_eq!(spgd_direction(&svd, &[4.0, 3.0]).unwrap(), vec![4.0, 3.0]);
    }

    #[test]
    fn residual_outside_range_is_filtered() {
        let svd = thin_svd(&m(&[vec![1.0, 0.0], vec![0.0, 0.0]]), 1e-12).unwrap();
        assert_eq!(spgd_direction(&svd, &[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        // gradient orthogonal to range(V) is annihilated too
        assert_eq!(
            precond_gradient_exact(&svd, &[0.0, 5.0]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn swap_jacobian_direction() {
        let svd = thin_svd(&m(&[vec![0.0, 1.0], vec![1.0, 0.0]]), 0.0).unwrap();
        let d = spgd_direction(&svd, &[1.0, 2.0]).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-15 && (d[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_preconditioned_gradient_by_hand() {
        // J = diag(2,1), F = [4,3] -> g = JᵀF = [8,3] -> V Σ⁻¹ Vᵀ g = [4,3]
        let j = m(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        let svd = thin_svd(&j, 0.0).unwrap();
        let out = precond_gradient_exact(&svd, &[8.0, 3.0]).unwrap();
        assert_eq!(out, vec![4.0, 3.0]);
        let dense = damped_apply_dense(&j, &[8.0, 3.0], 0.0, 0.5).unwrap();
        assert!(norm(&sub(&dense, &[4.0, 3.0])) < 1e-14);
    }

    #[test]
    fn orthogonal_jacobian_leaves_gradient_unchanged() {
        let c = (0.3f64).cos();
        let s = (0.3f64).sin();
        let svd = thin_svd(&m(&[vec![c, -s], vec![s, c]]), 0.0).unwrap();
        let out = precond_gradient_exact(&svd, &[0.7, -1.1]).unwrap();
        assert!(norm(&sub(&out, &[0.7, -1.1])) < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let svd = thin_svd(&Matrix::identity(2), 0.0).unwrap();
        assert!(spgd_direction(&svd, &[1.0]).is_err());
        assert!(precond_gradient_exact(&svd, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn heavy_damping_dominates() {
        let mut rng = Rng::new(1);
        let j = Matrix::from_row_major(5, 4, rng.normal_vec(20)).unwrap();
        let g = rng.normal_vec(4);
        let mu: f64 = 1e8;
        for p in [0.5, 1.0] {
            let out = damped_apply_dense(&j, &g, mu, p).unwrap();
            let expect: Vec<f64> = g.iter().map(|x| x / mu.powf(p)).collect();
            assert!(norm(&sub(&out, &expect)) <= 1e-6 * norm(&g) / mu.powf(p));
        }
    }

    #[test]
    fn singular_without_damping_fails() {
        let j = m(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(
            damped_apply_dense(&j, &[1.0, 1.0], 0.0, 0.5),
            Err(Error::NumericalFailure(_))
        ));
    }

    #[test]
    fn lanczos_eigenvector_and_zero_operator_cases() {
        // g an eigenvector of JᵀJ = diag(9, 1) with eigenvalue 9
        let j = m(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        let spec = PrecondSpec {
            mu: 1e-3,
            p: 0.5,
            ..PrecondSpec::damped_lanczos(1e-3, 1)
        };
        let out = damped_apply_lanczos(&j, &[2.0, 0.0], &spec).unwrap();
        assert!((out[0] - 2.0 * (9.0f64 + 1e-3).powf(-0.5)).abs() < 1e-14);
        assert_eq!(out[1], 0.0);

        let zero = Matrix::zeros(3, 3);
        let spec = PrecondSpec::damped_lanczos(1.0, 3);
        let g = [0.5, -1.0, 2.0];
        let out = damped_apply_lanczos(&zero, &g, &spec).unwrap();
        assert!(norm(&sub(&out, &g)) < 1e-15);
    }

    #[test]
    fn zero_gradient_maps_to_zero_direction() {
        let j = Matrix::identity(3);
        let out = damped_apply_lanczos(&j, &[0.0; 3], &PrecondSpec::default()).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn fisher_block_examples() {
        assert_eq!(
            fisher_block_apply(&[0.5, 0.5], &[1.0, 0.0]),
            vec![0.25, -0.25]
        );
        assert_eq!(fisher_block_apply(&[0.5, 0.5], &[1.0, 1.0]), vec![0.0, 0.0]);
        let out = fisher_block_apply(&[0.9, 0.1], &[1.0, 0.0]);
        assert!((out[0] - 0.09).abs() < 1e-15 && (out[1] + 0.09).abs() < 1e-15);
        assert_eq!(fisher_block_apply(&[0.2, 0.8], &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn one_hot_block_is_nearly_zero() {
        let c = crate::problems::PROB_CLAMP;
        let p = [1.0 - c, c];
        let u = [3.0, -7.0];
        let out = fisher_block_apply(&p, &u);
        assert!(norm(&out) <= 2.0 * c * norm(&u));
    }

    #[test]
    fn fisher_rows_must_be_probabilities() {
        assert!(FisherBlocks::new(2, vec![0.5, 0.6]).is_err());
        assert!(FisherBlocks::new(2, vec![0.5, 0.5, 0.1]).is_err());
        assert!(FisherBlocks::new(2, vec![1.5, -0.5]).is_err());
        assert_eq!(
            FisherBlocks::new(2, vec![0.5, 0.5, 0.25, 0.75])
                .unwrap()
                .batch(),
            2
        );
    }

    #[test]
    fn ce_operator_requires_matching_layout() {
        let j = Matrix::identity(4);
        let blocks = FisherBlocks::new(3, vec![0.2, 0.3, 0.5]).unwrap();
        assert!(ce_operator(&j, &blocks, 1e-4).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(PrecondSpec::default().validate().is_ok());
        assert!(PrecondSpec {
            k: 0,
            ..PrecondSpec::default()
        }
        .validate()
        .is_err());
        assert!(PrecondSpec {
            p: 0.0,
            ..PrecondSpec::default()
        }
        .validate()
        .is_err());
        assert!(PrecondSpec {
            mu: -1.0,
            ..PrecondSpec::default()
        }
        .validate()
        .is_err());
        assert!(PrecondSpec {
            k: 0,
            ..PrecondSpec::exact_svd()
        }
        .validate()
        .is_ok());
    }
}
