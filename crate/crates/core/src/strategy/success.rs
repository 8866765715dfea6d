use crate::error::{Error, Result};
use crate::model::{CountLaw, MempoolSnapshot, Scenario};

/// Inclusion probability of a strategic fee against a law of competitor counts.
#[derive(Debug, Clone)]
pub struct SuccessModel<'a> {
    scenario: &'a Scenario,
    law: CountLaw,
}

impl<'a> SuccessModel<'a> {
    /// Competitors are every arrival since the last block (no mempool view).
    pub fn naive(scenario: &'a Scenario, elapsed: f64) -> Result<Self> {
        Ok(SuccessModel { scenario, law: CountLaw::total_until_block(scenario, elapsed)? })
    }

    /// Competitors are the arrivals still to come; observed fees are handled
    /// through the remaining slot count.
    pub fn instant(scenario: &'a Scenario, elapsed: f64) -> Result<Self> {
        Ok(SuccessModel { scenario, law: CountLaw::remaining_until_block(scenario, elapsed)? })
    }

    pub fn law(&self) -> &CountLaw {
        &self.law
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    /// Chance that fewer than `slots` counted competitors outrank fee `b`.
    pub fn prob(&self, b: f64, slots: u64) -> f64 {
        if slots == 0 {
            return 0.0;
        }
        self.law.prob_thinned_at_most(self.scenario.outbid_probability(b), slots - 1)
    }

    /// Success probability with the observed pool occupying slots.
    pub fn prob_with_pool(&self, pool: &MempoolSnapshot, b: f64) -> f64 {
        let taken = pool.competing(self.scenario, b) as u64;
        self.prob(b, self.scenario.m().saturating_sub(taken))
    }
}

pub(crate) fn check_fee(scenario: &Scenario, b: f64) -> Result<()> {
    if b.is_finite() && b >= 0.0 && b <= scenario.valuation {
        Ok(())
    } else {
        Err(Error::domain(format!("fee must lie in [0, {}], got {b}", scenario.valuation)))
    }
}

/// `W_N(b)`: inclusion probability of fee `b` broadcast at `elapsed` without
/// looking at the mempool.
pub fn nbr_success_prob(scenario: &Scenario, elapsed: f64, b: f64) -> Result<f64> {
    check_fee(scenario, b)?;
    let model = SuccessModel::naive(scenario, elapsed)?;
    Ok(model.prob(b, scenario.m()))
}

/// `W_I(b)`: inclusion probability of fee `b` broadcast now, given the pool.
pub fn ibr_success_prob(scenario: &Scenario, pool: &MempoolSnapshot, b: f64) -> Result<f64> {
    check_fee(scenario, b)?;
    let model = SuccessModel::instant(scenario, pool.elapsed())?;
    Ok(model.prob_with_pool(pool, b))
}

/// Closed forms for the exponential interval; used as cross-checks of the
/// generic sums.
pub mod closed_form {
    use statrs::function::gamma::ln_gamma;

    /// `P(at most m-1 of a geometric(q) count exceed b)` with `F = F(b)`:
    /// `1 - ((q - qF) / (1 - qF))^m`.
    pub fn geometric_success(q: f64, f: f64, m: u64) -> f64 {
        1.0 - ((q - q * f) / (1.0 - q * f)).powf(m as f64)
    }

    /// IBR utility under memoryless blocks: `(V - b) [1 - r^(m - O)]`.
    pub fn pow_ibr_utility(v: f64, b: f64, q: f64, f: f64, m: u64, above: u64) -> f64 {
        if above >= m {
            return 0.0;
        }
        (v - b) * geometric_success(q, f, m - above)
    }

    fn binom_cdf(n: u64, f: f64, m: u64) -> f64 {
        // sum_{j<m} C(n,j) F^(n-j) (1-F)^j
        (0..m.min(n + 1))
            .map(|j| {
                let ln_c = ln_gamma(n as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0);
                let a = if n - j == 0 { 0.0 } else { (n - j) as f64 * f.ln() };
                let c = if j == 0 { 0.0 } else { j as f64 * (1.0 - f).ln() };
                (ln_c + a + c).exp()
            })
            .sum()
    }

    /// Linear arrivals, memoryless blocks, conditioned on at least
    /// `seen` arrivals so far:
    /// `(V-b)/q^seen [1 - r^m - sum_{n<seen} (1-q) q^n B(n)]`.
    pub fn pow_nbr_linear_utility(v: f64, b: f64, q: f64, f: f64, m: u64, seen: u64) -> f64 {
        let head: f64 = (0..seen).map(|n| (1.0 - q) * q.powf(n as f64) * binom_cdf(n, f, m)).sum();
        (v - b) / q.powf(seen as f64) * (geometric_success(q, f, m) - head)
    }

    /// Poisson arrivals, memoryless blocks: the Poisson(beta t_S) backlog
    /// convolved with the geometric remainder.
    pub fn pow_nbr_poisson_utility(v: f64, b: f64, lambda: f64, beta: f64, elapsed: f64, f: f64, m: u64) -> f64 {
        let q = beta / (lambda + beta);
        let n_max = ((1e-12f64).ln() / q.ln()).ceil() as u64 + (beta * elapsed * 2.0) as u64 + 100;
        let mut total = 0.0;
        for n in 0..=n_max {
            // lambda beta^n / (lambda+beta)^(n+1) * sum_{j<=n} e^{-beta t} t^j (lambda+beta)^j / j!
            let mut inner = 0.0;
            for j in 0..=n {
                let ln_term = (n - j) as f64 * q.ln() + (1.0 - q).ln() - beta * elapsed
                    + j as f64 * (beta * elapsed).ln()
                    - ln_gamma(j as f64 + 1.0);
                inner += if elapsed == 0.0 { if j == 0 { (1.0 - q) * q.powf(n as f64) } else { 0.0 } } else { ln_term.exp() };
            }
            total += inner * binom_cdf(n, f, m);
        }
        (v - b) * total
    }
}
