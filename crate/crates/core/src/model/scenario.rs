use serde::{Deserialize, Serialize};

use super::{ArrivalProcess, BlockIntervalModel, FeeDistribution};
use crate::error::{Error, Result};

/// Largest tick allowed relative to the valuation.
pub const MAX_TICK_RATIO: f64 = 1e-6;

/// How an exact fee tie between the strategic transaction and a competitor
/// is resolved by the miner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// The strategic transaction is treated as the latest arrival and wins.
    #[default]
    SpWins,
    /// Competitors win every exact tie.
    SpLoses,
}

/// Full environment seen by the strategic user.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub interval: BlockIntervalModel,
    pub arrivals: ArrivalProcess,
    pub fees: FeeDistribution,
    /// Block capacity `m` in transactions.
    pub capacity: u32,
    pub valuation: f64,
    /// Smallest currency unit.
    pub tick: f64,
    pub tie_rule: TieRule,
}

impl Scenario {
    pub fn new(
        interval: BlockIntervalModel,
        arrivals: ArrivalProcess,
        fees: FeeDistribution,
        capacity: u32,
        valuation: f64,
    ) -> Result<Self> {
        let s = Scenario {
            interval,
            arrivals,
            fees,
            capacity,
            valuation,
            tick: valuation * MAX_TICK_RATIO,
            tie_rule: TieRule::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_valuation(&self, valuation: f64) -> Result<Self> {
        let mut s = self.clone();
        s.valuation = valuation;
        s.tick = s.tick.min(valuation * MAX_TICK_RATIO);
        s.validate()?;
        Ok(s)
    }

    pub fn with_tick(mut self, tick: f64) -> Result<Self> {
        self.tick = tick;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tie_rule(mut self, tie_rule: TieRule) -> Self {
        self.tie_rule = tie_rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.interval.validate()?;
        self.arrivals.validate()?;
        self.fees.validate()?;
        if self.capacity < 1 {
            return Err(Error::config("block capacity must be at least 1"));
        }
        if !(self.valuation.is_finite() && self.valuation > 0.0) {
            return Err(Error::config(format!("valuation must be positive, got {}", self.valuation)));
        }
        let max_tick = self.valuation * MAX_TICK_RATIO;
        if !(self.tick.is_finite() && self.tick > 0.0 && self.tick <= max_tick * (1.0 + 1e-12)) {
            return Err(Error::config(format!(
                "tick must lie in (0, {max_tick}] for valuation {}, got {}",
                self.valuation, self.tick
            )));
        }
        Ok(())
    }

    pub fn m(&self) -> u64 {
        self.capacity as u64
    }

    /// Probability that a single competitor fee outranks a strategic fee `b`.
    pub fn outbid_probability(&self, b: f64) -> f64 {
        match self.tie_rule {
            TieRule::SpWins => 1.0 - self.fees.cdf(b),
            TieRule::SpLoses => 1.0 - self.fees.cdf_left(b),
        }
    }

    /// Whether a competitor fee `x` outranks a strategic fee `b`.
    pub fn outranks(&self, x: f64, b: f64) -> bool {
        match self.tie_rule {
            TieRule::SpWins => x > b,
            TieRule::SpLoses => x >= b,
        }
    }
}
