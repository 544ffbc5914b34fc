//! Step rules (GD, SPGD, SPGD-Adam, its AMSGrad variant, plain Adam),
//! learning-rate schedules and the training loop.

mod run;
mod steps;

pub use run::{run, NoObserver, Observer, StepRecord, Trace, TraceRow};
pub use steps::{
    adam_step, gd_step, spgd_adam_step, spgd_amsgrad_step, spgd_step, OptimizerState, SpgdStep,
    StepOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precond::PrecondSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gd,
    Spgd,
    SpgdAdam,
    SpgdAmsgrad,
    AdamBaseline,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Gd,
        Method::Spgd,
        Method::SpgdAdam,
        Method::SpgdAmsgrad,
        Method::AdamBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Spgd => "spgd",
            Method::SpgdAdam => "spgd-adam",
            Method::SpgdAmsgrad => "spgd-amsgrad",
            Method::AdamBaseline => "adam-baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `lr(t) = max(floor, alpha * factor^⌊t / interval⌋)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaircaseSchedule {
    pub factor: f64,
    pub interval: usize,
    pub floor: f64,
}

impl StaircaseSchedule {
    pub fn new(factor: f64, interval: usize, floor: f64) -> Result<Self> {
        let s = StaircaseSchedule {
            factor,
            interval,
            floor,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant() -> Self {
        StaircaseSchedule {
            factor: 1.0,
            interval: 1,
            floor: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.factor > 0.0 && self.factor <= 1.0) {
            return Err(Error::config(format!(
                "schedule factor must be in (0, 1], got {}",
                self.factor
            )));
        }
        if self.interval == 0 {
            return Err(Error::config("schedule interval must be >= 1"));
        }
        if !(self.floor >= 0.0) || !self.floor.is_finite() {
            return Err(Error::config(format!(
                "schedule floor must be >= 0, got {}",
                self.floor
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, alpha: f64, epoch: usize) -> f64 {
        let drops = (epoch / self.interval) as i32;
        (alpha * self.factor.powi(drops)).max(self.floor)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: StaircaseSchedule,
    pub precond: PrecondSpec,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            alpha: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule: StaircaseSchedule::constant(),
            precond: PrecondSpec::default(),
        }
    }
}

impl HyperParams {
    pub fn with_alpha(alpha: f64) -> Self {
        HyperParams {
            alpha,
            ..HyperParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::config(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::config(format!("eps must be > 0, got {}", self.eps)));
        }
        self.schedule.validate()?;
        self.precond.validate()
    }

    /// Validation plus the per-method constraint `β₁ < √β₂`: an error for
    /// the AMSGrad variant, a logged warning for SPGD-Adam.
    pub fn validate_for(&self, method: Method) -> Result<()> {
        self.validate()?;
        let ok = self.beta1 < self.beta2.sqrt();
        match method {
            Method::SpgdAmsgrad if !ok => Err(Error::config(format!(
                "spgd-amsgrad requires beta1 < sqrt(beta2); got beta1 = {}, sqrt(beta2) = {}",
                self.beta1,
                self.beta2.sqrt()
            ))),
            Method::SpgdAdam if !ok => {
                log::warn!(
                    "beta1 = {} >= sqrt(beta2) = {}; convergence guarantees do not apply",
                    self.beta1,
                    self.beta2.sqrt()
                );
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.schedule.lr_at(self.alpha, epoch)
    }
}
