use rand::Rng;

use super::BalanceSystem;
use crate::rng::substream;

/// Time-weighted state occupancy of a simulated path, with batch-means
/// standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyEstimate {
    pub fraction: Vec<f64>,
    pub stderr: Vec<f64>,
    pub events: u64,
}

/// Runs the jump chain for `events` transitions starting in state zero and
/// splits the path into `batches` equal runs of events.
pub fn simulate_occupancy(system: &BalanceSystem, events: u64, batches: usize, seed: u64) -> OccupancyEstimate {
    let n = system.len();
    let batches = batches.max(2);
    let cumulative: Vec<Vec<(usize, f64)>> = system
        .outgoing
        .iter()
        .zip(&system.exit)
        .map(|(out, total)| {
            let mut acc = 0.0;
            out.iter()
                .map(|&(to, r)| {
                    acc += r / total;
                    (to, acc)
                })
                .collect()
        })
        .collect();

    let mut rng = substream(seed, 0);
    let per_batch = (events / batches as u64).max(1);
    let mut time_total = vec![0.0; n];
    let mut batch_fracs: Vec<Vec<f64>> = Vec::with_capacity(batches);
    let mut state = 0usize;
    for _ in 0..batches {
        let mut time = vec![0.0; n];
        let mut span = 0.0;
        for _ in 0..per_batch {
            let u: f64 = rng.gen();
            let hold = -(1.0 - u).ln() / system.exit[state];
            time[state] += hold;
            span += hold;
            let pick: f64 = rng.gen();
            let row = &cumulative[state];
            state = row.iter().find(|(_, c)| pick < *c).unwrap_or(row.last().expect("every state can exit")).0;
        }
        for (t, s) in time_total.iter_mut().zip(&time) {
            *t += s;
        }
        batch_fracs.push(time.iter().map(|t| t / span).collect());
    }
    let grand: f64 = time_total.iter().sum();
    let b = batches as f64;
    let fraction: Vec<f64> = time_total.iter().map(|t| t / grand).collect();
    let stderr = (0..n)
        .map(|j| {
            let mean = batch_fracs.iter().map(|f| f[j]).sum::<f64>() / b;
            let var = batch_fracs.iter().map(|f| (f[j] - mean).powi(2)).sum::<f64>() / (b - 1.0);
            (var / b).sqrt()
        })
        .collect();
    OccupancyEstimate { fraction, stderr, events: per_batch * batches as u64 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::{build_balance_system, solve_stationary, CtmcParams};

    #[test]
    fn occupancy_tracks_stationary_law() {
        let p = CtmcParams::new(3, 1, 3, 1.0, 2.0, 0.5).unwrap();
        let sys = build_balance_system(&p).unwrap();
        let pi = solve_stationary(&sys).unwrap();
        let est = simulate_occupancy(&sys, 400_000, 40, 11);
        for j in 0..sys.len() {
            let tol = 5.0 * est.stderr[j] + 1e-12;
            assert!((est.fraction[j] - pi.probabilities[j]).abs() <= tol, "state {j}");
        }
    }
}
