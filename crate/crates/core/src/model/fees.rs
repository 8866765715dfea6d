use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Fee law of mempool-oblivious ordinary users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FeeDistribution {
    /// Pareto law pinned by its minimum and its mean; shape `mean / (mean - min)`.
    Pareto { min: f64, mean: f64 },
    /// Sorted sample with the right-continuous step CDF.
    Empirical { samples: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
}

impl FeeDistribution {
    pub fn pareto(min: f64, mean: f64) -> Result<Self> {
        let d = FeeDistribution::Pareto { min, mean };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = FeeDistribution::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        samples.sort_by(f64::total_cmp);
        let d = FeeDistribution::Empirical { samples };
        d.validate()?;
        Ok(d)
    }

    /// Point mass at `fee`.
    pub fn point(fee: f64) -> Result<Self> {
        Self::empirical(vec![fee])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeeDistribution::Pareto { min, mean } => {
                if !(min.is_finite() && *min > 0.0) {
                    return Err(Error::config(format!("pareto minimum must be positive, got {min}")));
                }
                if !(mean.is_finite() && mean > min) {
                    return Err(Error::config(format!(
                        "pareto mean must exceed the minimum (mean={mean}, min={min})"
                    )));
                }
            }
            FeeDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi > lo) {
                    return Err(Error::config(format!("uniform fees need 0 <= lo < hi, got [{lo}, {hi}]")));
                }
            }
            FeeDistribution::Empirical { samples } => {
                if samples.is_empty() {
                    return Err(Error::config("empirical fee sample is empty"));
                }
                if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::config("empirical fees must be finite and non-negative"));
                }
                if samples.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::config("empirical fees must be sorted ascending"));
                }
            }
        }
        Ok(())
    }

    /// Pareto shape parameter; `None` for other families.
    pub fn pareto_shape(&self) -> Option<f64> {
        match *self {
            FeeDistribution::Pareto { min, mean } => Some(mean / (mean - min)),
            _ => None,
        }
    }

    pub fn support_min(&self) -> f64 {
        match self {
            FeeDistribution::Pareto { min, .. } => *min,
            FeeDistribution::Uniform { lo, .. } => *lo,
            FeeDistribution::Empirical { samples } => samples[0],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            FeeDistribution::Pareto { mean, .. } => *mean,
            FeeDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            FeeDistribution::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    /// `F(b) = P(X <= b)`.
    pub fn cdf(&self, b: f64) -> f64 {
        match self {
            FeeDistribution::Pareto { min, .. } => {
                if b <= *min {
                    0.0
                } else {
                    let alpha = self.pareto_shape().unwrap();
                    -(alpha * (min / b).ln()).exp_m1()
                }
            }
            FeeDistribution::Uniform { lo, hi } => ((b - lo) / (hi - lo)).clamp(0.0, 1.0),
            FeeDistribution::Empirical { samples } => {
                samples.partition_point(|x| *x <= b) as f64 / samples.len() as f64
            }
        }
    }

    /// `P(X < b)`; differs from [`cdf`](Self::cdf) only at atoms.
    pub fn cdf_left(&self, b: f64) -> f64 {
        match self {
            FeeDistribution::Empirical { samples } => {
                samples.partition_point(|x| *x < b) as f64 / samples.len() as f64
            }
            _ => self.cdf(b),
        }
    }

    /// Generalized inverse `inf { x : F(x) >= p }`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("quantile level must lie in [0, 1], got {p}")));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        match self {
            FeeDistribution::Pareto { min, .. } => {
                if p >= 1.0 {
                    return f64::INFINITY;
                }
                let alpha = self.pareto_shape().unwrap();
                min * (-(-p).ln_1p() / alpha).exp()
            }
            FeeDistribution::Uniform { lo, hi } => lo + p * (hi - lo),
            FeeDistribution::Empirical { samples } => {
                let n = samples.len();
                let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
                samples[idx]
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FeeDistribution::Empirical { samples } => samples[rng.gen_range(0..samples.len())],
            _ => self.quantile_unchecked(rng.gen::<f64>()),
        }
    }

    /// Points where `F` jumps or has a kink; the utility curves are only
    /// piecewise smooth between them.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            FeeDistribution::Pareto { min, .. } => vec![*min],
            FeeDistribution::Uniform { lo, hi } => vec![*lo, *hi],
            FeeDistribution::Empirical { samples } => {
                let mut v = samples.clone();
                v.dedup();
                v
            }
        }
    }

    /// Expected `m`-th largest of `n` i.i.d. draws; zero when `n < m`.
    pub fn expected_mth_largest(&self, n: u64, m: u64) -> f64 {
        if n < m || m == 0 {
            return 0.0;
        }
        // ascending rank of the m-th largest
        let k = n - m + 1;
        match self {
            FeeDistribution::Pareto { min, .. } => {
                let a = 1.0 / self.pareto_shape().unwrap();
                let (nf, mf) = (n as f64, m as f64);
                min * (ln_gamma(nf + 1.0) - ln_gamma(nf + 1.0 - a) + ln_gamma(mf - a) - ln_gamma(mf)).exp()
            }
            FeeDistribution::Uniform { lo, hi } => lo + (hi - lo) * k as f64 / (n as f64 + 1.0),
            FeeDistribution::Empirical { samples } => {
                // U_(k) ~ Beta(k, n - k + 1); X_(k) = Q(U_(k))
                let len = samples.len() as f64;
                let (a, b) = (k as f64, (n - k + 1) as f64);
                let mut prev = 0.0;
                let mut acc = 0.0;
                for (i, x) in samples.iter().enumerate() {
                    let u = (i + 1) as f64 / len;
                    let cur = if u >= 1.0 { 1.0 } else { beta_reg(a, b, u) };
                    acc += x * (cur - prev);
                    prev = cur;
                }
                acc
            }
        }
    }
}
