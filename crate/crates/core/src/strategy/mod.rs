//! Fee and broadcast-time strategies against mempool-oblivious competitors.

mod curve;
mod optimize;
mod success;
mod wait;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use curve::{utility_vs_elapsed_curve, CurvePoint, CURVE_POOL_DRAWS};
pub use optimize::{maximize, Maximum, GRID_POINTS};
pub use success::{closed_form, ibr_success_prob, nbr_success_prob, SuccessModel};
pub use wait::{pos_wait_expected_utility, pos_wait_outcome, WaitOutcome};

use crate::error::{Error, Result};
use crate::model::{BlockIntervalModel, CountLaw, MempoolSnapshot, Scenario};
use success::check_fee;

/// How the fee of a decision is set when it is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeeRule {
    /// Broadcast the stated fee.
    Posted,
    /// Wait until the deadline and bid one tick above the m-th largest
    /// pending fee, abstaining if that exceeds the valuation. The recorded
    /// fee is the expected payment given inclusion.
    ThresholdPlusTick,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyDecision {
    pub fee: f64,
    pub broadcast_time: f64,
    pub expected_utility: f64,
    pub inclusion_probability: f64,
    pub fee_rule: FeeRule,
}

/// Strategy selector shared by the evaluators, the simulator and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Nbr,
    Ibr,
    Fbr,
    /// Wallet-style recommendation: the expected m-th largest fee of a full block.
    AverageBaseline,
    FixedFee(f64),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Nbr => f.write_str("nbr"),
            Strategy::Ibr => f.write_str("ibr"),
            Strategy::Fbr => f.write_str("fbr"),
            Strategy::AverageBaseline => f.write_str("baseline"),
            Strategy::FixedFee(b) => write!(f, "fixed:{b}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "nbr" => Ok(Strategy::Nbr),
            "ibr" => Ok(Strategy::Ibr),
            "fbr" => Ok(Strategy::Fbr),
            "baseline" | "average" => Ok(Strategy::AverageBaseline),
            _ => match lower.strip_prefix("fixed:") {
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|b| b.is_finite() && *b >= 0.0)
                    .map(Strategy::FixedFee)
                    .ok_or_else(|| Error::Parse(format!("bad fixed fee in strategy '{s}'"))),
                None => Err(Error::Parse(format!(
                    "unknown strategy '{s}' (expected nbr, ibr, fbr, baseline or fixed:<fee>)"
                ))),
            },
        }
    }
}

fn posted(fee: f64, at: f64, m: Maximum, model_prob: f64) -> StrategyDecision {
    StrategyDecision {
        fee,
        broadcast_time: at,
        expected_utility: m.value.max(0.0),
        inclusion_probability: model_prob,
        fee_rule: FeeRule::Posted,
    }
}

fn fee_breaks(scenario: &Scenario) -> Vec<f64> {
    tie_shifted(scenario, scenario.fees.breakpoints())
}

/// When competitors win ties, beating a fee `x` costs `x` plus one tick.
fn tie_shifted(scenario: &Scenario, mut breaks: Vec<f64>) -> Vec<f64> {
    if scenario.tie_rule == crate::model::TieRule::SpLoses {
        let n = breaks.len();
        for i in 0..n {
            breaks.push(breaks[i] + scenario.tick);
        }
    }
    breaks
}

/// Best fee when broadcasting at `elapsed` without reading the mempool.
pub fn nbr_optimize(scenario: &Scenario, elapsed: f64) -> Result<StrategyDecision> {
    let model = SuccessModel::naive(scenario, elapsed)?;
    let v = scenario.valuation;
    let m = scenario.m();
    let best = maximize(0.0, v, &fee_breaks(scenario), GRID_POINTS, |b| (v - b) * model.prob(b, m));
    Ok(posted(best.arg, elapsed, best, model.prob(best.arg, m)))
}

/// Best fee when broadcasting now, given the observed pool.
pub fn ibr_optimize(scenario: &Scenario, pool: &MempoolSnapshot) -> Result<StrategyDecision> {
    let model = SuccessModel::instant(scenario, pool.elapsed())?;
    let v = scenario.valuation;
    let mut breaks = scenario.fees.breakpoints();
    breaks.extend_from_slice(pool.fees());
    let breaks = tie_shifted(scenario, breaks);
    let best = maximize(0.0, v, &breaks, GRID_POINTS, |b| (v - b) * model.prob_with_pool(pool, b));
    Ok(posted(best.arg, pool.elapsed(), best, model.prob_with_pool(pool, best.arg)))
}

/// Joint choice of fee and broadcast time.
///
/// Memoryless blocks: broadcasting now with the IBR fee. Fixed blocks: wait
/// for the deadline and outbid the threshold by one tick.
pub fn fbr_decide(scenario: &Scenario, pool: &MempoolSnapshot) -> Result<StrategyDecision> {
    match scenario.interval {
        BlockIntervalModel::Exponential { .. } => ibr_optimize(scenario, pool),
        BlockIntervalModel::Fixed { duration } => {
            let out = pos_wait_outcome(scenario, pool)?;
            Ok(StrategyDecision {
                fee: out.expected_fee,
                broadcast_time: duration,
                expected_utility: out.expected_utility,
                inclusion_probability: out.inclusion_probability,
                fee_rule: FeeRule::ThresholdPlusTick,
            })
        }
    }
}

/// Expected m-th largest fee of a full block, averaged over the block's
/// arrival count.
pub fn average_baseline_fee(scenario: &Scenario) -> Result<f64> {
    let law = CountLaw::total_until_block(scenario, 0.0)?;
    let m = scenario.m();
    let total: f64 = law.iter().map(|(n, p)| p * scenario.fees.expected_mth_largest(n, m)).sum();
    Ok(total / (1.0 - law.tail()))
}

/// Decision of a user posting a fixed fee at `elapsed` without reading the
/// pool. A fee above the valuation means the user abstains.
pub fn fixed_fee_decision(scenario: &Scenario, elapsed: f64, fee: f64) -> Result<StrategyDecision> {
    if !(fee.is_finite() && fee >= 0.0) {
        return Err(Error::domain(format!("fee must be non-negative, got {fee}")));
    }
    if fee > scenario.valuation {
        scenario.interval.check_open(elapsed)?;
        return Ok(StrategyDecision {
            fee: scenario.valuation,
            broadcast_time: elapsed,
            expected_utility: 0.0,
            inclusion_probability: 0.0,
            fee_rule: FeeRule::Posted,
        });
    }
    let w = nbr_success_prob(scenario, elapsed, fee)?;
    Ok(StrategyDecision {
        fee,
        broadcast_time: elapsed,
        expected_utility: (scenario.valuation - fee) * w,
        inclusion_probability: w,
        fee_rule: FeeRule::Posted,
    })
}

/// Evaluates any strategy at the pool's elapsed time.
pub fn decide(scenario: &Scenario, strategy: Strategy, pool: &MempoolSnapshot) -> Result<StrategyDecision> {
    match strategy {
        Strategy::Nbr => nbr_optimize(scenario, pool.elapsed()),
        Strategy::Ibr => ibr_optimize(scenario, pool),
        Strategy::Fbr => fbr_decide(scenario, pool),
        Strategy::AverageBaseline => fixed_fee_decision(scenario, pool.elapsed(), average_baseline_fee(scenario)?),
        Strategy::FixedFee(b) => fixed_fee_decision(scenario, pool.elapsed(), b),
    }
}

/// Expected utility of posting fee `b` at a later time `broadcast_at`, seen
/// from the pool observed now. Arrivals in between are not observed before
/// broadcasting.
pub fn delayed_utility(scenario: &Scenario, pool: &MempoolSnapshot, b: f64, broadcast_at: f64) -> Result<f64> {
    check_fee(scenario, b)?;
    let now = pool.elapsed();
    if broadcast_at.is_nan() || broadcast_at < now {
        return Err(Error::domain(format!("broadcast time {broadcast_at} precedes the observation at {now}")));
    }
    scenario.interval.check_open(now)?;
    let alive = 1.0 - scenario.interval.residual_cdf(now, broadcast_at)?;
    if alive <= 0.0 {
        return Ok(0.0);
    }
    let slots = scenario.m().saturating_sub(pool.competing(scenario, b) as u64);
    if slots == 0 {
        return Ok(0.0);
    }
    let p = scenario.outbid_probability(b);
    let interim = CountLaw::window(&scenario.arrivals, now, broadcast_at).thinned_pmf(p, slots - 1);
    let rest = CountLaw::remaining_until_block(scenario, broadcast_at)?;
    let win: f64 = interim
        .iter()
        .enumerate()
        .map(|(j, pj)| pj * rest.prob_thinned_at_most(p, slots - 1 - j as u64))
        .sum();
    Ok((scenario.valuation - b) * alive * win)
}
