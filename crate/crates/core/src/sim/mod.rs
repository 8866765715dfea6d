//! Monte Carlo oracle for the analytic evaluators.

mod oblivious;
mod semi;

use std::time::Duration;

pub use oblivious::{
    paired_delay_gain, paired_postponement_experiment, simulate_oblivious, simulate_oblivious_from, PairedGain,
    PostponementPoint,
};
pub use semi::simulate_semi_strategic;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub trials: u64,
    pub mean_utility: f64,
    pub utility_stderr: f64,
    pub inclusion_rate: f64,
    pub seed: u64,
    /// Not part of any reproducible output.
    pub wall_time: Duration,
    /// Trials whose inclusion was re-derived by a full sort.
    pub audited: u64,
}

/// Per-trial outcome.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Outcome {
    pub utility: f64,
    pub included: bool,
}

/// Sum in a fixed tree order, independent of scheduling.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `(mean, sample standard deviation / sqrt(n))`.
pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    (mean, (pairwise_sum(&dev) / (n - 1.0) / n).sqrt())
}

pub(crate) fn report(outcomes: &[Outcome], seed: u64, wall_time: Duration, audited: u64) -> SimulationReport {
    let utilities: Vec<f64> = outcomes.iter().map(|o| o.utility).collect();
    let (mean_utility, utility_stderr) = mean_stderr(&utilities);
    let wins = outcomes.iter().filter(|o| o.included).count();
    SimulationReport {
        trials: outcomes.len() as u64,
        mean_utility,
        utility_stderr,
        inclusion_rate: wins as f64 / outcomes.len().max(1) as f64,
        seed,
        wall_time,
        audited,
    }
}
