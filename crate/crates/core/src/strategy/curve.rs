use rayon::prelude::*;

use super::{decide, Strategy};
use crate::error::Result;
use crate::model::{MempoolSnapshot, Scenario};
use crate::rng::substream;

/// Pool realizations averaged per elapsed time for pool-aware strategies.
pub const CURVE_POOL_DRAWS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub elapsed: f64,
    pub utility: f64,
    pub fee: f64,
    pub win_prob: f64,
}

/// Expected utility of `strategy` at each elapsed time in `grid`.
///
/// Pool-aware strategies are averaged over `draws` pools drawn from the
/// arrival process; draw `d` uses the same random stream at every grid point.
pub fn utility_vs_elapsed_curve(
    scenario: &Scenario,
    strategy: Strategy,
    grid: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let pool_aware = matches!(strategy, Strategy::Ibr | Strategy::Fbr);
    let draws = if pool_aware { draws.max(1) } else { 1 };
    grid.iter()
        .map(|&t| {
            let decisions = (0..draws)
                .into_par_iter()
                .map(|d| {
                    let pool = if pool_aware {
                        MempoolSnapshot::draw(scenario, t, &mut substream(seed, d as u64))?
                    } else {
                        MempoolSnapshot::empty(t)?
                    };
                    decide(scenario, strategy, &pool)
                })
                .collect::<Result<Vec<_>>>()?;
            let k = decisions.len() as f64;
            Ok(CurvePoint {
                elapsed: t,
                utility: decisions.iter().map(|d| d.expected_utility).sum::<f64>() / k,
                fee: decisions.iter().map(|d| d.fee).sum::<f64>() / k,
                win_prob: decisions.iter().map(|d| d.inclusion_probability).sum::<f64>() / k,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArrivalProcess, BlockIntervalModel, FeeDistribution};

    #[test]
    fn pos_nbr_curve_is_flat() {
        let s = Scenario::new(
            BlockIntervalModel::fixed(10.0).unwrap(),
            ArrivalProcess::Linear { rate: 40.0 },
            FeeDistribution::pareto(1.0, 5.9512).unwrap(),
            200,
            3.0,
        )
        .unwrap();
        let c = utility_vs_elapsed_curve(&s, Strategy::Nbr, &[0.0, 4.0, 9.0], 1, 0).unwrap();
        assert!(c.iter().all(|p| p.utility == c[0].utility));
    }

    #[test]
    fn pow_nbr_curve_is_nonincreasing() {
        let s = Scenario::new(
            BlockIntervalModel::exponential(0.1).unwrap(),
            ArrivalProcess::Poisson { rate: 40.0 },
            FeeDistribution::pareto(1.0, 5.9512).unwrap(),
            200,
            4.0,
        )
        .unwrap();
        let grid: Vec<f64> = (0..6).map(|i| i as f64 * 4.0).collect();
        let c = utility_vs_elapsed_curve(&s, Strategy::Nbr, &grid, 1, 0).unwrap();
        for w in c.windows(2) {
            assert!(w[1].utility <= w[0].utility + 1e-9, "{:?}", c);
        }
    }
}
