//! Environment model: block intervals, arrivals, fee laws, the mempool and
//! the competitor-count laws every strategy evaluator builds on.

mod arrivals;
mod count_law;
mod fees;
mod interval;
mod mempool;
mod scenario;

pub use arrivals::ArrivalProcess;
pub use count_law::{CountLaw, TRUNCATION_TOL};
pub use fees::FeeDistribution;
pub use interval::BlockIntervalModel;
pub use mempool::MempoolSnapshot;
pub use scenario::{Scenario, TieRule, MAX_TICK_RATIO};

pub(crate) use arrivals::poisson_pmf;

use crate::error::Result;

pub fn interval_cdf(model: &BlockIntervalModel, t: f64) -> Result<f64> {
    model.cdf(t)
}

pub fn residual_interval_cdf(model: &BlockIntervalModel, elapsed: f64, t: f64) -> Result<f64> {
    model.residual_cdf(elapsed, t)
}

pub fn arrival_count_pmf(process: &ArrivalProcess, window: f64, n: u64) -> Result<f64> {
    process.count_pmf(window, n)
}

pub fn count_above(pool: &MempoolSnapshot, b: f64) -> usize {
    pool.count_above(b)
}

pub fn threshold_fee(pool: &MempoolSnapshot, m: usize) -> Result<f64> {
    pool.threshold_fee(m)
}
