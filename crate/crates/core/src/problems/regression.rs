use super::{Mlp, MlpLinearization, ResidualProblem};
use crate::error::{Error, Result};
use crate::linalg::{LinearMap, Matrix};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// Settings for [`MlpRegression`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    /// Input dimension `d`.
    pub dim: usize,
    /// Target frequency `n` in `sin(nπ Σxᵢ)`.
    pub frequency: f64,
    pub hidden: Vec<usize>,
    pub batch: usize,
    pub test_size: usize,
    /// Seeds the fixed test set and the initial batch.
    pub data_seed: u64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            dim: 1,
            frequency: 3.0,
            hidden: vec![16, 16],
            batch: 256,
            test_size: 1 << 12,
            data_seed: 0,
        }
    }
}

/// Regression of `sin(nπ Σxᵢ)` on `[0,1]^d` by a tanh network.
///
/// The residual on a batch of `B` points is `√(2/B) (u(xᵢ;θ) − yᵢ)`, so the
/// objective `½‖F‖²` is the batch mean squared error. The evaluation loss is
/// the mean squared error on a fixed test set.
#[derive(Clone, Debug)]
pub struct MlpRegression {
    net: Mlp,
    cfg: RegressionConfig,
    batch_x: Vec<f64>,
    batch_y: Vec<f64>,
    test_x: Vec<f64>,
    test_y: Vec<f64>,
}

impl MlpRegression {
    pub fn new(cfg: RegressionConfig) -> Result<Self> {
        if cfg.dim == 0 || cfg.batch == 0 {
            return Err(Error::input(
                "MlpRegression: dim and batch must be positive",
            ));
        }
        let mut widths = vec![cfg.dim];
        widths.extend(&cfg.hidden);
        widths.push(1);
        let net = Mlp::new(widths)?;
        let mut rng = Rng::new(cfg.data_seed);
        let test_x: Vec<f64> = (0..cfg.test_size * cfg.dim)
            .map(|_| rng.uniform())
            .collect();
        let mut p = MlpRegression {
            net,
            test_y: Vec::new(),
            test_x,
            batch_x: Vec::new(),
            batch_y: Vec::new(),
            cfg,
        };
        p.test_y = p.targets(&p.test_x);
        p.resample(&mut rng);
        Ok(p)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn target(&self, x: &[f64]) -> f64 {
        (self.cfg.frequency * std::f64::consts::PI * x.iter().sum::<f64>()).sin()
    }

    fn targets(&self, xs: &[f64]) -> Vec<f64> {
        xs.chunks(self.cfg.dim).map(|x| self.target(x)).collect()
    }

    fn scale(&self) -> f64 {
        (2.0 / self.cfg.batch as f64).sqrt()
    }

    fn batch_linearization<'a>(&'a self, theta: &'a [f64]) -> BatchJacobian<'a> {
        BatchJacobian {
            lin: self
                .net
                .linearize(theta, &self.batch_x)
                .expect("shape checked"),
            scale: self.scale(),
        }
    }
}

/// `J_F` on the current batch with activations cached once.
struct BatchJacobian<'a> {
    lin: MlpLinearization<'a>,
    scale: f64,
}

impl LinearMap for BatchJacobian<'_> {
    fn in_dim(&self) -> usize {
        self.lin.param_dim()
    }

    fn out_dim(&self) -> usize {
        self.lin.batch()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.lin.jvp(v);
        out.iter_mut().for_each(|o| *o *= self.scale);
        out
    }

    fn apply_adjoint(&self, u: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = u.iter().map(|x| x * self.scale).collect();
        self.lin.vjp(&scaled)
    }
}

impl ResidualProblem for MlpRegression {
    fn name(&self) -> &str {
        "sine-regression"
    }

    fn param_dim(&self) -> usize {
        self.net.param_count()
    }

    fn residual_dim(&self) -> usize {
        self.cfg.batch
    }

    fn residual(&self, theta: &[f64]) -> Vec<f64> {
        let s = self.scale();
        let u = self
            .net
            .forward_batch(theta, &self.batch_x)
            .expect("shape checked");
        u.iter()
            .zip(&self.batch_y)
            .map(|(u, y)| s * (u - y))
            .collect()
    }

    fn jvp(&self, theta: &[f64], v: &[f64]) -> Vec<f64> {
        self.batch_linearization(theta).apply(v)
    }

    fn vjp(&self, theta: &[f64], u: &[f64]) -> Vec<f64> {
        self.batch_linearization(theta).apply_adjoint(u)
    }

    fn linearization<'a>(&'a self, theta: &'a [f64]) -> Option<Box<dyn LinearMap + 'a>> {
        Some(Box::new(self.batch_linearization(theta)))
    }

    fn loss_gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.loss_and_gradient(theta).1
    }

    fn loss_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let jac = self.batch_linearization(theta);
        let s = self.scale();
        let r: Vec<f64> = jac
            .lin
            .outputs()
            .iter()
            .zip(&self.batch_y)
            .map(|(u, y)| s * (u - y))
            .collect();
        (
            0.5 * r.iter().map(|x| x * x).sum::<f64>(),
            jac.apply_adjoint(&r),
        )
    }

    /// Rows are per-sample reverse-mode gradients.
    fn jacobian(&self, theta: &[f64]) -> Option<Matrix> {
        let s = self.scale();
        let m = self.param_dim();
        let mut j = Matrix::zeros(self.cfg.batch, m);
        let mut row = vec![0.0; m];
        for (i, x) in self.batch_x.chunks(self.cfg.dim).enumerate() {
            row.iter_mut().for_each(|r| *r = 0.0);
            self.net
                .vjp(theta, x, &[s], &mut row)
                .expect("shape checked");
            for (k, &r) in row.iter().enumerate() {
                j[(i, k)] = r;
            }
        }
        Some(j)
    }

    fn initial_point(&self, rng: &mut Rng) -> Vec<f64> {
        self.net.xavier_normal(rng)
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn resample(&mut self, rng: &mut Rng) {
        self.batch_x = (0..self.cfg.batch * self.cfg.dim)
            .map(|_| rng.uniform())
            .collect();
        self.batch_y = self.targets(&self.batch_x);
    }

    fn eval_loss(&self, theta: &[f64]) -> Option<f64> {
        if self.test_y.is_empty() {
            return None;
        }
        let u = self.net.forward_batch(theta, &self.test_x).ok()?;
        let sse: f64 = u
            .iter()
            .zip(&self.test_y)
            .map(|(u, y)| (u - y).powi(2))
            .sum();
        Some(sse / self.test_y.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gradient, gradient_check, objective};

    fn small() -> MlpRegression {
        MlpRegression::new(RegressionConfig {
            hidden: vec![4, 3],
            batch: 16,
            test_size: 64,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_weights_output_zero_and_loss_is_target_energy() {
        let p = small();
        let theta = vec![0.0; p.param_dim()];
        let mean_sq = p.batch_y.iter().map(|y| y * y).sum::<f64>() / 16.0;
        assert!((objective(&p, &theta).unwrap() - mean_sq).abs() < 1e-14);
        // only the output bias moves at zero weights: its gradient is -2 mean(y)
        let g = gradient(&p, &theta).unwrap();
        let mean_y = p.batch_y.iter().sum::<f64>() / 16.0;
        assert!((g[p.param_dim() - 1] + 2.0 * mean_y).abs() < 1e-14);
        assert!(g[..p.param_dim() - 1].iter().all(|&x| x == 0.0));
        assert!(gradient_check(&p, &theta).unwrap() < 1e-5);
    }

    #[test]
    fn test_set_is_fixed_across_resampling() {
        let mut p = small();
        let theta = p.initial_point(&mut Rng::new(2));
        let before = p.eval_loss(&theta).unwrap();
        let batch = p.batch_x.clone();
        p.resample(&mut Rng::new(5));
        assert_ne!(batch, p.batch_x);
        assert_eq!(before, p.eval_loss(&theta).unwrap());
    }

    #[test]
    fn targets_follow_sine_of_sum() {
        let p = MlpRegression::new(RegressionConfig {
            dim: 2,
            frequency: 1.0,
            test_size: 0,
            batch: 4,
            ..Default::default()
        })
        .unwrap();
        assert!((p.target(&[0.25, 0.25]) - 1.0).abs() < 1e-15);
        assert!(p.eval_loss(&vec![0.0; p.param_dim()]).is_none());
    }
}
