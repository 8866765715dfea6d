use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the time between consecutive valid blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BlockIntervalModel {
    /// Memoryless mining (PoW-like): `T ~ Exp(rate)`.
    Exponential { rate: f64 },
    /// Slot-based production (PoS-like): `T = duration` exactly.
    Fixed { duration: f64 },
}

impl BlockIntervalModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        let model = BlockIntervalModel::Exponential { rate };
        model.validate()?;
        Ok(model)
    }

    pub fn fixed(duration: f64) -> Result<Self> {
        let model = BlockIntervalModel::Fixed { duration };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BlockIntervalModel::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => {
                Err(Error::config(format!("block rate must be positive, got {rate}")))
            }
            BlockIntervalModel::Fixed { duration } if !(duration.is_finite() && duration > 0.0) => {
                Err(Error::config(format!("block duration must be positive, got {duration}")))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BlockIntervalModel::Exponential { rate } => 1.0 / rate,
            BlockIntervalModel::Fixed { duration } => duration,
        }
    }

    pub fn is_memoryless(&self) -> bool {
        matches!(self, BlockIntervalModel::Exponential { .. })
    }

    /// `G(t) = P(T <= t)`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_time(t, "t")?;
        Ok(match *self {
            BlockIntervalModel::Exponential { rate } => -(-rate * t).exp_m1(),
            BlockIntervalModel::Fixed { duration } => {
                if t < duration {
                    0.0
                } else {
                    1.0
                }
            }
        })
    }

    /// `P(T <= t | T > elapsed)`.
    pub fn residual_cdf(&self, elapsed: f64, t: f64) -> Result<f64> {
        check_time(elapsed, "elapsed")?;
        if t < elapsed {
            return Err(Error::domain(format!(
                "residual cdf needs t >= elapsed (t={t}, elapsed={elapsed})"
            )));
        }
        self.check_open(elapsed)?;
        match *self {
            BlockIntervalModel::Exponential { .. } => self.cdf(t - elapsed),
            BlockIntervalModel::Fixed { .. } => self.cdf(t),
        }
    }

    /// `P(T > t | T > elapsed)`; zero past a fixed deadline.
    pub fn survival_from(&self, elapsed: f64, t: f64) -> Result<f64> {
        Ok(1.0 - self.residual_cdf(elapsed, t)?)
    }

    /// Rejects elapsed times at or past a fixed-interval deadline.
    pub fn check_open(&self, elapsed: f64) -> Result<()> {
        check_time(elapsed, "elapsed")?;
        if let BlockIntervalModel::Fixed { duration } = *self {
            if elapsed >= duration {
                return Err(Error::InvalidState(format!(
                    "block already due: elapsed {elapsed} >= interval {duration}"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_time(t: f64, name: &str) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be a finite non-negative time, got {t}")))
    }
}
