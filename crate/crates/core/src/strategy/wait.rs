use crate::error::{Error, Result};
use crate::model::{BlockIntervalModel, CountLaw, MempoolSnapshot, Scenario};

/// Quadrature nodes spread over the fee axis.
const QUAD_POINTS: usize = 2048;

/// Outcome of waiting for a fixed deadline and bidding one tick above the
/// final threshold fee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitOutcome {
    pub expected_utility: f64,
    pub inclusion_probability: f64,
    /// Expected payment given inclusion; zero if inclusion is impossible.
    pub expected_fee: f64,
}

/// `E[max(V - b^m - tick, 0)]` with `b^m` the threshold at the deadline.
pub fn pos_wait_expected_utility(scenario: &Scenario, pool: &MempoolSnapshot) -> Result<f64> {
    Ok(pos_wait_outcome(scenario, pool)?.expected_utility)
}

pub fn pos_wait_outcome(scenario: &Scenario, pool: &MempoolSnapshot) -> Result<WaitOutcome> {
    if !matches!(scenario.interval, BlockIntervalModel::Fixed { .. }) {
        return Err(Error::domain("waiting for the deadline needs a fixed block interval"));
    }
    let future = CountLaw::remaining_until_block(scenario, pool.elapsed())?;
    let m = scenario.m();
    // P(b^m <= x): fewer than m fees end up strictly above x
    let cdf = |x: f64| {
        let above = pool.count_above(x) as u64;
        if above >= m {
            return 0.0;
        }
        future.prob_thinned_at_most(1.0 - scenario.fees.cdf(x), m - 1 - above)
    };

    let top = scenario.valuation - scenario.tick;
    if top <= 0.0 {
        return Ok(WaitOutcome { expected_utility: 0.0, inclusion_probability: 0.0, expected_fee: 0.0 });
    }
    let mut cuts: Vec<f64> = scenario.fees.breakpoints();
    cuts.extend_from_slice(pool.fees());
    cuts.retain(|x| *x > 0.0 && *x < top);
    cuts.push(0.0);
    cuts.push(top);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut integral = 0.0;
    for w in cuts.windows(2) {
        let (a, c) = (w[0], w[1]);
        let share = ((c - a) / top * QUAD_POINTS as f64).ceil() as usize;
        let n = (share.max(2) + 1) & !1;
        integral += simpson(a, c, n, &cdf);
    }
    let inclusion = cdf(top);
    let expected_fee = if inclusion > 0.0 { (scenario.valuation - integral / inclusion).max(0.0) } else { 0.0 };
    Ok(WaitOutcome { expected_utility: integral, inclusion_probability: inclusion, expected_fee })
}

/// Composite Simpson rule on `[a, c]` with `n` (even) panels. The right end
/// uses the left limit, so jumps at `c` do not leak into the piece.
fn simpson(a: f64, c: f64, n: usize, f: &impl Fn(f64) -> f64) -> f64 {
    let h = (c - a) / n as f64;
    let right = c - (c.abs().max(1.0)) * 1e-13;
    let mut sum = f(a) + f(right);
    for i in 1..n {
        let x = a + h * i as f64;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    sum * h / 3.0
}
