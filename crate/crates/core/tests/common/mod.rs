#![allow(dead_code)]

use fee_timing::model::{ArrivalProcess, BlockIntervalModel, FeeDistribution, MempoolSnapshot, Scenario, TieRule};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ETH_MEAN_FEE: f64 = 5.9512;

pub fn eth(arrivals: ArrivalProcess, valuation: f64) -> Scenario {
    Scenario::new(
        BlockIntervalModel::fixed(10.0).unwrap(),
        arrivals,
        FeeDistribution::pareto(1.0, ETH_MEAN_FEE).unwrap(),
        200,
        valuation,
    )
    .unwrap()
}

pub fn linear(rate: f64) -> ArrivalProcess {
    ArrivalProcess::Linear { rate }
}

pub fn poisson(rate: f64) -> ArrivalProcess {
    ArrivalProcess::Poisson { rate }
}

pub fn random_fees(rng: &mut ChaCha8Rng) -> FeeDistribution {
    match rng.gen_range(0..3) {
        0 => {
            let min = rng.gen_range(0.5..2.0);
            FeeDistribution::pareto(min, min * rng.gen_range(1.3..8.0)).unwrap()
        }
        1 => {
            let lo = rng.gen_range(0.0..2.0);
            FeeDistribution::uniform(lo, lo + rng.gen_range(0.5..6.0)).unwrap()
        }
        _ => {
            let n = rng.gen_range(1..12);
            // integer-valued fees produce ties with the pool
            FeeDistribution::empirical((0..n).map(|_| rng.gen_range(1..8) as f64).collect()).unwrap()
        }
    }
}

fn random_arrivals(rng: &mut ChaCha8Rng, max_rate: f64) -> ArrivalProcess {
    let rate = rng.gen_range(0.5..max_rate);
    if rng.gen_bool(0.5) {
        linear(rate)
    } else {
        poisson(rate)
    }
}

/// Exponential-interval scenario with moderate congestion.
pub fn random_pow(rng: &mut ChaCha8Rng) -> Scenario {
    let interval = BlockIntervalModel::exponential(rng.gen_range(0.05..1.0)).unwrap();
    let arrivals = random_arrivals(rng, 40.0);
    let m = rng.gen_range(1..60);
    with_random_ties(Scenario::new(interval, arrivals, random_fees(rng), m, rng.gen_range(0.5..10.0)).unwrap(), rng)
}

fn with_random_ties(s: Scenario, rng: &mut ChaCha8Rng) -> Scenario {
    if rng.gen_bool(0.25) {
        s.with_tie_rule(TieRule::SpLoses)
    } else {
        s
    }
}

/// Fixed-interval scenario.
pub fn random_pos(rng: &mut ChaCha8Rng) -> Scenario {
    let interval = BlockIntervalModel::fixed(rng.gen_range(2.0..20.0)).unwrap();
    let arrivals = random_arrivals(rng, 30.0);
    let m = rng.gen_range(1..150);
    with_random_ties(Scenario::new(interval, arrivals, random_fees(rng), m, rng.gen_range(0.5..10.0)).unwrap(), rng)
}

/// Elapsed time at which the next block is still pending.
pub fn random_elapsed(s: &Scenario, rng: &mut ChaCha8Rng) -> f64 {
    match s.interval {
        BlockIntervalModel::Exponential { rate } => rng.gen_range(0.0..2.0 / rate),
        BlockIntervalModel::Fixed { duration } => rng.gen_range(0.0..0.95 * duration),
    }
}

pub fn random_pool(s: &Scenario, rng: &mut ChaCha8Rng) -> MempoolSnapshot {
    let t = random_elapsed(s, rng);
    MempoolSnapshot::draw(s, t, rng).unwrap()
}

/// Evenly spaced fees in `[0, V]`.
pub fn fee_grid(v: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| (v * i as f64 / (points - 1) as f64).min(v)).collect()
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Pool for comparing arrival rates. Deterministic arrivals are observed at
/// the start of the interval: elsewhere a faster clock can push the next
/// arrival later and the comparison no longer isolates congestion.
pub fn congestion_pool(s: &Scenario, rng: &mut ChaCha8Rng) -> MempoolSnapshot {
    match s.arrivals {
        ArrivalProcess::Linear { .. } => MempoolSnapshot::empty(0.0).unwrap(),
        ArrivalProcess::Poisson { .. } => random_pool(s, rng),
    }
}
