use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::interval::check_time;
use crate::error::{Error, Result};

/// Arrival process of ordinary (mempool-oblivious) transactions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ArrivalProcess {
    /// Deterministic stream: `N_t = floor(rate * t)`, arrivals at `j / rate`.
    Linear { rate: f64 },
    /// Homogeneous Poisson stream.
    Poisson { rate: f64 },
}

impl ArrivalProcess {
    pub fn rate(&self) -> f64 {
        match *self {
            ArrivalProcess::Linear { rate } | ArrivalProcess::Poisson { rate } => rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rate = self.rate();
        if rate.is_finite() && rate >= 0.0 {
            Ok(())
        } else {
            Err(Error::config(format!("arrival rate must be non-negative, got {rate}")))
        }
    }

    /// Number of linear arrivals in `[0, t]`.
    pub fn linear_count(rate: f64, t: f64) -> u64 {
        // nudge so that e.g. 40 * 0.5 lands on 20 despite rounding
        (rate * t * (1.0 + 1e-14)).floor() as u64
    }

    /// `P(N_window = n)`.
    pub fn count_pmf(&self, window: f64, n: u64) -> Result<f64> {
        check_time(window, "window")?;
        Ok(match *self {
            ArrivalProcess::Linear { rate } => {
                if Self::linear_count(rate, window) == n {
                    1.0
                } else {
                    0.0
                }
            }
            ArrivalProcess::Poisson { rate } => poisson_pmf(rate * window, n),
        })
    }
}

pub(crate) fn poisson_pmf(mean: f64, n: u64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    (nf * mean.ln() - mean - ln_gamma(nf + 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_examples() {
        let p = ArrivalProcess::Poisson { rate: 40.0 };
        assert_eq!(p.count_pmf(0.0, 0).unwrap(), 1.0);
        let l = ArrivalProcess::Linear { rate: 40.0 };
        assert_eq!(l.count_pmf(0.5, 20).unwrap(), 1.0);
        assert_eq!(l.count_pmf(0.5, 19).unwrap(), 0.0);
        let p2 = ArrivalProcess::Poisson { rate: 2.0 };
        let expected = 2.0 * (-2.0f64).exp();
        assert!((p2.count_pmf(1.0, 2).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn poisson_pmf_sums_to_one() {
        let p = ArrivalProcess::Poisson { rate: 40.0 };
        for window in [0.1, 1.0, 10.0, 25.0] {
            let total: f64 = (0..5000).map(|n| p.count_pmf(window, n).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "window {window}: {total}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ArrivalProcess::Linear { rate: 1.0 }.count_pmf(-1.0, 0).is_err());
        assert!(ArrivalProcess::Poisson { rate: -1.0 }.validate().is_err());
    }
}
