use rand::Rng;

use super::interval::check_time;
use super::{ArrivalProcess, Scenario};
use crate::error::{Error, Result};

/// Pending fees observed in the mempool, `t_S` time units after the last block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MempoolSnapshot {
    /// Sorted descending.
    fees: Vec<f64>,
    elapsed: f64,
}

impl MempoolSnapshot {
    pub fn new(mut fees: Vec<f64>, elapsed: f64) -> Result<Self> {
        check_time(elapsed, "elapsed")?;
        if fees.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::domain("pending fees must be finite and non-negative"));
        }
        fees.sort_by(|a, b| b.total_cmp(a));
        Ok(MempoolSnapshot { fees, elapsed })
    }

    pub fn empty(elapsed: f64) -> Result<Self> {
        Self::new(Vec::new(), elapsed)
    }

    /// Draws the pool seen at `elapsed` from the scenario's arrival process.
    pub fn draw<R: Rng + ?Sized>(scenario: &Scenario, elapsed: f64, rng: &mut R) -> Result<Self> {
        check_time(elapsed, "elapsed")?;
        let count = match scenario.arrivals {
            ArrivalProcess::Linear { rate } => ArrivalProcess::linear_count(rate, elapsed),
            ArrivalProcess::Poisson { rate } => sample_poisson(rate * elapsed, rng),
        };
        let fees = (0..count).map(|_| scenario.fees.sample(rng)).collect();
        Self::new(fees, elapsed)
    }

    /// Pending fees, largest first.
    pub fn fees(&self) -> &[f64] {
        &self.fees
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn len(&self) -> usize {
        self.fees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fees.is_empty()
    }

    pub fn with_elapsed(&self, elapsed: f64) -> Result<Self> {
        check_time(elapsed, "elapsed")?;
        Ok(MempoolSnapshot { fees: self.fees.clone(), elapsed })
    }

    /// Appends newly observed fees.
    pub fn extended(&self, extra: &[f64], elapsed: f64) -> Result<Self> {
        let mut fees = self.fees.clone();
        fees.extend_from_slice(extra);
        Self::new(fees, elapsed)
    }

    /// `O_t(b)`: pending fees strictly above `b`.
    pub fn count_above(&self, b: f64) -> usize {
        self.fees.partition_point(|x| *x > b)
    }

    /// Pending fees at or above `b`.
    pub fn count_at_or_above(&self, b: f64) -> usize {
        self.fees.partition_point(|x| *x >= b)
    }

    /// `b^m`: the `m`-th largest pending fee, or zero with fewer than `m` pending.
    pub fn threshold_fee(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Err(Error::domain("capacity must be at least 1"));
        }
        Ok(self.fees.get(m - 1).copied().unwrap_or(0.0))
    }

    /// Competitors in the pool that outrank a strategic fee `b` under the scenario's tie rule.
    pub fn competing(&self, scenario: &Scenario, b: f64) -> usize {
        match scenario.tie_rule {
            super::TieRule::SpWins => self.count_above(b),
            super::TieRule::SpLoses => self.count_at_or_above(b),
        }
    }
}

pub(crate) fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = rand_distr::Poisson::new(mean).expect("positive mean");
    rand_distr::Distribution::<f64>::sample(&d, rng) as u64
}
