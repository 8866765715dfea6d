use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{mean_stderr, report, Outcome, SimulationReport};
use crate::error::{Error, Result};
use crate::model::{ArrivalProcess, BlockIntervalModel, MempoolSnapshot, Scenario, TieRule};
use crate::rng::substream;
use crate::strategy::{average_baseline_fee, fbr_decide, ibr_optimize, nbr_optimize, Strategy};

/// One in this many trials is audited by a full sort.
const AUDIT_EVERY: u64 = 100;

/// Random environment of one trial, seen from the observation time.
struct Trial {
    pool: MempoolSnapshot,
    block: f64,
    /// Arrivals after the observation time up to the block, in time order.
    future: Vec<(f64, f64)>,
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

fn draw_trial(scenario: &Scenario, elapsed: f64, given: Option<&MempoolSnapshot>, rng: &mut ChaCha8Rng) -> Result<Trial> {
    let pool = match given {
        Some(p) => p.clone(),
        None => MempoolSnapshot::draw(scenario, elapsed, rng)?,
    };
    let block = match scenario.interval {
        BlockIntervalModel::Fixed { duration } => duration,
        BlockIntervalModel::Exponential { rate } => elapsed + exp_sample(rng, rate),
    };
    let mut future = Vec::new();
    match scenario.arrivals {
        ArrivalProcess::Linear { rate } => {
            let first = ArrivalProcess::linear_count(rate, elapsed) + 1;
            let last = ArrivalProcess::linear_count(rate, block);
            for j in first..=last {
                future.push((j as f64 / rate, scenario.fees.sample(rng)));
            }
        }
        ArrivalProcess::Poisson { rate } => {
            if rate > 0.0 {
                let mut t = elapsed;
                loop {
                    t += exp_sample(rng, rate);
                    if t > block {
                        break;
                    }
                    future.push((t, scenario.fees.sample(rng)));
                }
            }
        }
    }
    Ok(Trial { pool, block, future })
}

#[derive(Debug, Clone, Copy)]
enum Plan {
    Post { fee: f64, at: f64 },
    Abstain,
    /// Bid one tick over the final threshold at the deadline.
    WaitThreshold,
}

fn resolve(scenario: &Scenario, trial: &Trial, plan: Plan, audit: bool) -> Result<Outcome> {
    let m = scenario.m() as usize;
    match plan {
        Plan::Abstain => Ok(Outcome::default()),
        Plan::Post { fee, at } => {
            if at > trial.block {
                return Ok(Outcome::default());
            }
            let ahead = trial.pool.competing(scenario, fee)
                + trial.future.iter().filter(|(_, x)| scenario.outranks(*x, fee)).count();
            let included = ahead < m;
            if audit && included != sorted_inclusion(scenario, trial, fee) {
                return Err(Error::Numerical(format!("inclusion audit failed for fee {fee}")));
            }
            Ok(Outcome { utility: if included { scenario.valuation - fee } else { 0.0 }, included })
        }
        Plan::WaitThreshold => {
            let mut all: Vec<f64> = trial.pool.fees().to_vec();
            all.extend(trial.future.iter().map(|(_, x)| *x));
            let threshold = if all.len() >= m {
                all.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a));
                all[m - 1]
            } else {
                0.0
            };
            let fee = threshold + scenario.tick;
            if fee > scenario.valuation {
                return Ok(Outcome::default());
            }
            if audit && !sorted_inclusion(scenario, trial, fee) {
                return Err(Error::Numerical(format!("threshold bid {fee} was not included")));
            }
            Ok(Outcome { utility: scenario.valuation - fee, included: true })
        }
    }
}

/// Top-`m` membership by a full sort on `(fee, priority)`.
fn sorted_inclusion(scenario: &Scenario, trial: &Trial, fee: f64) -> bool {
    let sp_priority = match scenario.tie_rule {
        TieRule::SpWins => 1,
        TieRule::SpLoses => -1,
    };
    let mut all: Vec<(f64, i32)> = trial.pool.fees().iter().map(|x| (*x, 0)).collect();
    all.extend(trial.future.iter().map(|(_, x)| (*x, 0)));
    all.push((fee, sp_priority));
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
    all.iter().take(scenario.m() as usize).any(|e| e.1 == sp_priority)
}

fn fixed_plan(scenario: &Scenario, fee: f64, at: f64) -> Plan {
    if fee > scenario.valuation {
        Plan::Abstain
    } else {
        Plan::Post { fee, at }
    }
}

/// Plan that does not depend on the observed pool, if the strategy has one.
fn static_plan(scenario: &Scenario, strategy: Strategy, elapsed: f64) -> Result<Option<Plan>> {
    Ok(match strategy {
        Strategy::Nbr => Some(Plan::Post { fee: nbr_optimize(scenario, elapsed)?.fee, at: elapsed }),
        Strategy::AverageBaseline => Some(fixed_plan(scenario, average_baseline_fee(scenario)?, elapsed)),
        Strategy::FixedFee(b) => Some(fixed_plan(scenario, b, elapsed)),
        Strategy::Fbr if !scenario.interval.is_memoryless() => Some(Plan::WaitThreshold),
        Strategy::Ibr | Strategy::Fbr => None,
    })
}

fn pool_plan(scenario: &Scenario, strategy: Strategy, pool: &MempoolSnapshot) -> Result<Plan> {
    let d = match strategy {
        Strategy::Fbr => fbr_decide(scenario, pool)?,
        _ => ibr_optimize(scenario, pool)?,
    };
    Ok(Plan::Post { fee: d.fee, at: pool.elapsed() })
}

fn run(
    scenario: &Scenario,
    strategy: Strategy,
    elapsed: f64,
    given: Option<&MempoolSnapshot>,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    scenario.validate()?;
    scenario.interval.check_open(elapsed)?;
    if let Strategy::FixedFee(b) = strategy {
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::domain(format!("fixed fee must be non-negative, got {b}")));
        }
    }
    let start = Instant::now();
    let plan = match (static_plan(scenario, strategy, elapsed)?, given) {
        (Some(p), _) => Some(p),
        (None, Some(pool)) => Some(pool_plan(scenario, strategy, pool)?),
        (None, None) => None,
    };
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let trial = draw_trial(scenario, elapsed, given, &mut rng)?;
            let plan = match plan {
                Some(p) => p,
                None => pool_plan(scenario, strategy, &trial.pool)?,
            };
            resolve(scenario, &trial, plan, i % AUDIT_EVERY == 0)
        })
        .collect::<Result<Vec<_>>>()?;
    let audited = trials.div_ceil(AUDIT_EVERY);
    Ok(report(&outcomes, seed, start.elapsed(), audited))
}

/// Simulates `strategy` deciding at `elapsed`, with the pool drawn afresh in
/// every trial.
pub fn simulate_oblivious(
    scenario: &Scenario,
    strategy: Strategy,
    elapsed: f64,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport> {
    run(scenario, strategy, elapsed, None, trials, seed)
}

/// Same, conditioned on an observed pool.
pub fn simulate_oblivious_from(
    scenario: &Scenario,
    strategy: Strategy,
    pool: &MempoolSnapshot,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport> {
    run(scenario, strategy, pool.elapsed(), Some(pool), trials, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostponementPoint {
    /// Interim arrivals observed before broadcasting.
    pub delay: u64,
    pub mean_utility: f64,
    pub utility_stderr: f64,
    /// Mean chosen fee over trials that broadcast before the block.
    pub optimal_fee: f64,
    pub broadcast_rate: f64,
}

/// Broadcast after observing `delay` further arrivals, re-optimizing the fee
/// against the grown pool. All delays share each trial's random draws.
pub fn paired_postponement_experiment(
    scenario: &Scenario,
    pool: &MempoolSnapshot,
    delays: &[u64],
    trials: u64,
    seed: u64,
) -> Result<Vec<PostponementPoint>> {
    if !scenario.interval.is_memoryless() {
        return Err(Error::domain("postponement experiment needs exponential block intervals"));
    }
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    scenario.interval.check_open(pool.elapsed())?;
    let base = pool_plan(scenario, Strategy::Fbr, pool)?;
    // rows: trial, columns: (utility, fee if broadcast)
    let rows = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let trial = draw_trial(scenario, pool.elapsed(), Some(pool), &mut rng)?;
            delays
                .iter()
                .map(|&d| {
                    if d == 0 {
                        let fee = match base {
                            Plan::Post { fee, .. } => fee,
                            _ => unreachable!("memoryless blocks broadcast immediately"),
                        };
                        return Ok((resolve(scenario, &trial, base, false)?.utility, Some(fee)));
                    }
                    let Some(&(at, _)) = trial.future.get(d as usize - 1) else {
                        return Ok((0.0, None));
                    };
                    let seen: Vec<f64> = trial.future[..d as usize].iter().map(|(_, x)| *x).collect();
                    let grown = pool.extended(&seen, at)?;
                    let later = Trial { pool: grown, block: trial.block, future: trial.future[d as usize..].to_vec() };
                    let plan = pool_plan(scenario, Strategy::Fbr, &later.pool)?;
                    let fee = match plan {
                        Plan::Post { fee, .. } => fee,
                        _ => unreachable!(),
                    };
                    Ok((resolve(scenario, &later, plan, false)?.utility, Some(fee)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(delays
        .iter()
        .enumerate()
        .map(|(c, &delay)| {
            let utilities: Vec<f64> = rows.iter().map(|r| r[c].0).collect();
            let fees: Vec<f64> = rows.iter().filter_map(|r| r[c].1).collect();
            let (mean_utility, utility_stderr) = mean_stderr(&utilities);
            PostponementPoint {
                delay,
                mean_utility,
                utility_stderr,
                optimal_fee: mean_stderr(&fees).0,
                broadcast_rate: fees.len() as f64 / trials as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedGain {
    /// Mean of (delayed utility - immediate utility).
    pub mean_gain: f64,
    pub stderr: f64,
    pub immediate: f64,
    pub delayed: f64,
}

/// Common-random-number comparison of posting fee `fee` now versus at
/// `broadcast_at`, without looking at the pool in between.
pub fn paired_delay_gain(
    scenario: &Scenario,
    pool: &MempoolSnapshot,
    fee: f64,
    broadcast_at: f64,
    trials: u64,
    seed: u64,
) -> Result<PairedGain> {
    if !(0.0..=scenario.valuation).contains(&fee) {
        return Err(Error::domain(format!("fee must lie in [0, {}], got {fee}", scenario.valuation)));
    }
    if broadcast_at < pool.elapsed() {
        return Err(Error::domain("delayed broadcast precedes the observation"));
    }
    scenario.interval.check_open(pool.elapsed())?;
    let pairs = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let trial = draw_trial(scenario, pool.elapsed(), Some(pool), &mut rng)?;
            let now = resolve(scenario, &trial, Plan::Post { fee, at: pool.elapsed() }, false)?.utility;
            let later = resolve(scenario, &trial, Plan::Post { fee, at: broadcast_at }, false)?.utility;
            Ok((now, later))
        })
        .collect::<Result<Vec<_>>>()?;
    let gains: Vec<f64> = pairs.iter().map(|(a, b)| b - a).collect();
    let (mean_gain, stderr) = mean_stderr(&gains);
    let now: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let later: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(PairedGain { mean_gain, stderr, immediate: mean_stderr(&now).0, delayed: mean_stderr(&later).0 })
}
