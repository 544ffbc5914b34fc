use super::{Mlp, ResidualProblem};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// Lower clamp applied to probabilities before they enter a Fisher block.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftmaxConfig {
    pub dim: usize,
    pub classes: usize,
    pub samples: usize,
    /// Empty for a linear (multinomial logistic) model.
    pub hidden: Vec<usize>,
    /// Distance scale of the class centers.
    pub separation: f64,
    pub data_seed: u64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            dim: 2,
            classes: 3,
            samples: 64,
            hidden: vec![8],
            separation: 2.0,
            data_seed: 0,
        }
    }
}

/// Gaussian-blob classification with a softmax network.
///
/// The residual map is the network output (logits, `B x K` row-major); the
/// loss is the mean cross-entropy, with gradient `Jᵀ(p − y)/B`.
#[derive(Clone, Debug)]
pub struct SoftmaxToy {
    net: Mlp,
    cfg: SoftmaxConfig,
    features: Vec<f64>,
    labels: Vec<usize>,
}

/// Row-wise softmax of `logits` (`rows x k`).
pub fn softmax_rows(logits: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(k) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|z| (z - max).exp()).collect();
        let s: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / s));
    }
    out
}

impl SoftmaxToy {
    pub fn new(cfg: SoftmaxConfig) -> Result<Self> {
        if cfg.classes < 2 || cfg.samples == 0 || cfg.dim == 0 {
            return Err(Error::input(
                "SoftmaxToy: need >= 2 classes and a nonempty dataset",
            ));
        }
        let mut widths = vec![cfg.dim];
        widths.extend(&cfg.hidden);
        widths.push(cfg.classes);
        let net = Mlp::new(widths)?;
        let mut rng = Rng::new(cfg.data_seed);
        let centers: Vec<Vec<f64>> = (0..cfg.classes)
            .map(|_| {
                rng.normal_vec(cfg.dim)
                    .iter()
                    .map(|c| c * cfg.separation)
                    .collect()
            })
            .collect();
        let mut features = Vec::with_capacity(cfg.samples * cfg.dim);
        let mut labels = Vec::with_capacity(cfg.samples);
        for i in 0..cfg.samples {
            let label = i % cfg.classes;
            labels.push(label);
            features.extend(centers[label].iter().map(|c| c + rng.normal()));
        }
        Ok(SoftmaxToy {
            net,
            cfg,
            features,
            labels,
        })
    }

    pub fn classes(&self) -> usize {
        self.cfg.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Unclamped softmax probabilities at `theta`.
    pub fn probabilities(&self, theta: &[f64]) -> Vec<f64> {
        softmax_rows(&self.residual(theta), self.cfg.classes)
    }

    pub fn accuracy(&self, theta: &[f64]) -> f64 {
        let p = self.probabilities(theta);
        let hits = p
            .chunks(self.cfg.classes)
            .zip(&self.labels)
            .filter(|(row, &l)| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(j, _)| j)
                    == Some(l)
            })
            .count();
        hits as f64 / self.labels.len() as f64
    }
}

impl ResidualProblem for SoftmaxToy {
    fn name(&self) -> &str {
        "softmax"
    }

    fn param_dim(&self) -> usize {
        self.net.param_count()
    }

    fn residual_dim(&self) -> usize {
        self.cfg.samples * self.cfg.classes
    }

    fn residual(&self, theta: &[f64]) -> Vec<f64> {
        self.features
            .chunks(self.cfg.dim)
            .flat_map(|x| self.net.forward(theta, x).expect("shape checked"))
            .collect()
    }

    fn jvp(&self, theta: &[f64], v: &[f64]) -> Vec<f64> {
        self.features
            .chunks(self.cfg.dim)
            .flat_map(|x| self.net.jvp(theta, x, v).expect("shape checked").d_value)
            .collect()
    }

    fn vjp(&self, theta: &[f64], u: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.param_dim()];
        for (x, ui) in self
            .features
            .chunks(self.cfg.dim)
            .zip(u.chunks(self.cfg.classes))
        {
            self.net
                .vjp(theta, x, ui, &mut grad)
                .expect("shape checked");
        }
        grad
    }

    fn jacobian(&self, theta: &[f64]) -> Option<Matrix> {
        let k = self.cfg.classes;
        let m = self.param_dim();
        let mut j = Matrix::zeros(self.residual_dim(), m);
        let mut e = vec![0.0; k];
        let mut row = vec![0.0; m];
        for (i, x) in self.features.chunks(self.cfg.dim).enumerate() {
            for c in 0..k {
                e[c] = 1.0;
                row.iter_mut().for_each(|r| *r = 0.0);
                self.net.vjp(theta, x, &e, &mut row).expect("shape checked");
                e[c] = 0.0;
                for (col, &r) in row.iter().enumerate() {
                    j[(i * k + c, col)] = r;
                }
            }
        }
        Some(j)
    }

    /// Mean cross-entropy, via a stable log-sum-exp.
    fn loss(&self, theta: &[f64]) -> f64 {
        let logits = self.residual(theta);
        let k = self.cfg.classes;
        let total: f64 = logits
            .chunks(k)
            .zip(&self.labels)
            .map(|(row, &l)| {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                lse - row[l]
            })
            .sum();
        total / self.labels.len() as f64
    }

    fn loss_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let k = self.cfg.classes;
        let b = self.labels.len() as f64;
        let mut diff = self.probabilities(theta);
        for (i, &l) in self.labels.iter().enumerate() {
            diff[i * k + l] -= 1.0;
        }
        diff.iter_mut().for_each(|d| *d /= b);
        self.vjp(theta, &diff)
    }

    /// Probabilities clamped below at [`PROB_CLAMP`] and renormalized.
    fn class_probs(&self, theta: &[f64]) -> Option<(usize, Vec<f64>)> {
        let k = self.cfg.classes;
        let mut p = self.probabilities(theta);
        for row in p.chunks_mut(k) {
            row.iter_mut().for_each(|x| *x = x.max(PROB_CLAMP));
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        Some((k, p))
    }

    fn initial_point(&self, rng: &mut Rng) -> Vec<f64> {
        self.net.xavier_normal(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::gradient_check;

    #[test]
    fn rows_sum_to_one() {
        let p = SoftmaxToy::new(SoftmaxConfig::default()).unwrap();
        let theta = p.initial_point(&mut Rng::new(1));
        for row in p.probabilities(&theta).chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let (_, clamped) = p.class_probs(&theta).unwrap();
        assert!(clamped.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn saturated_logits_are_clamped() {
        let p = softmax_rows(&[800.0, 0.0, -800.0], 3);
        assert_eq!(p[2], 0.0);
        let toy = SoftmaxToy::new(SoftmaxConfig {
            hidden: vec![],
            ..Default::default()
        })
        .unwrap();
        // huge weights saturate every sample
        let theta: Vec<f64> = (0..toy.param_dim())
            .map(|i| 500.0 * (i as f64 - 3.0))
            .collect();
        let (_, q) = toy.class_probs(&theta).unwrap();
        assert!(q.iter().all(|&x| x >= PROB_CLAMP * 0.99 && x < 1.0));
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let p = SoftmaxToy::new(SoftmaxConfig::default()).unwrap();
        let theta = p.initial_point(&mut Rng::new(2));
        assert!(gradient_check(&p, &theta).unwrap() < 1e-5);
        // uniform logits give loss ln K
        assert!((p.loss(&vec![0.0; p.param_dim()]) - 3f64.ln()).abs() < 1e-14);
    }
}
