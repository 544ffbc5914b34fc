//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [run]
//! id = "sine1d"
//! epochs = 3000
//! seeds = [0, 1, 2]
//! thresholds = [1e-2, 1e-3]   # positive, strictly descending
//! out = "out"                 # optional
//!
//! [problem]
//! kind = "sine-regression"    # linear-lsq | discrete-pde | sine-regression | poisson | softmax-toy
//! hidden = [16, 16]           # remaining keys depend on the kind
//!
//! [method.spgd-adam]          # one table per method; the key names the method
//! alpha = 1e-2
//! lr_factor = 0.7
//! lr_interval = 100
//! lr_floor = 1e-5
//! precond = "damped-lanczos"  # exact-svd | damped-dense | damped-lanczos | cross-entropy-lanczos
//! mu = 1e-5
//! k = 10
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::validate_thresholds;
use crate::error::{Error, Result};
use crate::optim::{HyperParams, Method, StaircaseSchedule};
use crate::precond::{PrecondKind, PrecondSpec};
use crate::problems::{
    make_linear_lsq, DiscretePde, MlpRegression, Nonlinearity, PoissonCollocation, PoissonConfig,
    RegressionConfig, ResidualProblem, SoftmaxConfig, SoftmaxToy,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub problem: ProblemSpec,
    pub method: BTreeMap<Method, MethodSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub id: String,
    pub epochs: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_thresholds() -> Vec<f64> {
    vec![1e-2, 1e-3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    LinearLsq(LinearSpec),
    DiscretePde(PdeSpec),
    SineRegression(RegressionConfig),
    Poisson(PoissonConfig),
    SoftmaxToy(SoftmaxConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSpec {
    pub m: usize,
    pub n: usize,
    pub kappa: f64,
    /// Seeds the matrix and the solution; the run seed only moves `θ₀`.
    pub data_seed: u64,
}

impl Default for LinearSpec {
    fn default() -> Self {
        LinearSpec {
            m: 16,
            n: 16,
            kappa: 10.0,
            data_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSpec {
    pub grid_size: usize,
    /// `zero`, `cubic` or `bratu`.
    pub nonlinearity: String,
    pub bratu_lambda: f64,
    /// Newton for the reference root starts from `root_amplitude · sin(πx)`.
    pub root_amplitude: f64,
    pub init_radius: f64,
}

impl Default for PdeSpec {
    fn default() -> Self {
        PdeSpec {
            grid_size: 31,
            nonlinearity: "cubic".into(),
            bratu_lambda: 1.0,
            root_amplitude: 5.0,
            init_radius: 0.1,
        }
    }
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::LinearLsq(_) => "linear-lsq",
            ProblemSpec::DiscretePde(_) => "discrete-pde",
            ProblemSpec::SineRegression(_) => "sine-regression",
            ProblemSpec::Poisson(_) => "poisson",
            ProblemSpec::SoftmaxToy(_) => "softmax-toy",
        }
    }

    /// A fresh problem instance; every run cell builds its own.
    pub fn build(&self) -> Result<Box<dyn ResidualProblem>> {
        Ok(match self {
            ProblemSpec::LinearLsq(s) => Box::new(make_linear_lsq(s.m, s.n, s.kappa, s.data_seed)?),
            ProblemSpec::DiscretePde(s) => {
                let g = match s.nonlinearity.as_str() {
                    "zero" => Nonlinearity::Zero,
                    "cubic" => Nonlinearity::Cubic,
                    "bratu" => Nonlinearity::Bratu(s.bratu_lambda),
                    other => {
                        return Err(Error::config(format!(
                            "problem.nonlinearity: expected zero, cubic or bratu, got {other:?}"
                        )))
                    }
                };
                let mut pde = DiscretePde::new(s.grid_size, g)?.with_init_radius(s.init_radius);
                if g != Nonlinearity::Zero {
                    pde = pde.with_sine_root(s.root_amplitude, 1e-10)?;
                }
                Box::new(pde)
            }
            ProblemSpec::SineRegression(c) => Box::new(MlpRegression::new(c.clone())?),
            ProblemSpec::Poisson(c) => Box::new(PoissonCollocation::new(c.clone())?),
            ProblemSpec::SoftmaxToy(c) => Box::new(SoftmaxToy::new(c.clone())?),
        })
    }
}

/// Hyperparameters of one method, flattened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSection {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr_factor: f64,
    pub lr_interval: usize,
    pub lr_floor: f64,
    pub precond: PrecondKind,
    pub mu: f64,
    pub p: f64,
    pub k: usize,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trunc_tol: Option<f64>,
}

impl Default for MethodSection {
    fn default() -> Self {
        let h = HyperParams::default();
        MethodSection {
            alpha: h.alpha,
            beta1: h.beta1,
            beta2: h.beta2,
            eps: h.eps,
            lr_factor: h.schedule.factor,
            lr_interval: h.schedule.interval,
            lr_floor: h.schedule.floor,
            precond: h.precond.kind,
            mu: h.precond.mu,
            p: h.precond.p,
            k: h.precond.k,
            delta: h.precond.delta,
            trunc_tol: h.precond.trunc_tol,
        }
    }
}

impl MethodSection {
    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            alpha: self.alpha,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            schedule: StaircaseSchedule {
                factor: self.lr_factor,
                interval: self.lr_interval,
                floor: self.lr_floor,
            },
            precond: PrecondSpec {
                kind: self.precond,
                mu: self.mu,
                p: self.p,
                k: self.k,
                delta: self.delta,
                trunc_tol: self.trunc_tol,
            },
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let id_ok = !self.run.id.is_empty()
            && self
                .run
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
        if !id_ok {
            return Err(Error::config(format!(
                "run.id must be non-empty and use only [A-Za-z0-9._-], got {:?}",
                self.run.id
            )));
        }
        if self.run.epochs == 0 {
            return Err(Error::config("run.epochs must be >= 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::config("run.seeds must list at least one seed"));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.run.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::config(format!("run.seeds lists seed {dup} twice")));
        }
        validate_thresholds(&self.run.thresholds)?;
        if self.method.is_empty() {
            return Err(Error::config("config defines no [method.<name>] table"));
        }
        for (m, sec) in &self.method {
            sec.hyper()
                .validate_for(*m)
                .map_err(|e| Error::config(format!("method.{m}: {e}")))?;
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<Method> {
        self.method.keys().copied().collect()
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
