use statrs::function::gamma::ln_gamma;

use super::{poisson_pmf, ArrivalProcess, BlockIntervalModel, Scenario};
use crate::error::Result;

/// Tail mass dropped when an infinite count law is truncated.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// Terms whose remaining contribution falls below this are skipped.
const EARLY_STOP: f64 = 1e-14;

/// Truncated probability mass function of a transaction count.
///
/// `pmf[i]` is `P(N = offset + i)`; `tail` is the mass discarded by truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct CountLaw {
    offset: u64,
    pmf: Vec<f64>,
    /// `suffix[i] = sum(pmf[i..])`.
    suffix: Vec<f64>,
    tail: f64,
}

/// `P(Bin(n, p) = k)` stepped in `n`; kept in log space only while it
/// would underflow.
struct EqStep {
    k: f64,
    ln_q: f64,
    q: f64,
    ln_eq: f64,
    eq: Option<f64>,
}

impl EqStep {
    fn new(p: f64, k: u64) -> Self {
        let ln_eq = k as f64 * p.ln();
        let mut s = EqStep { k: k as f64, ln_q: (-p).ln_1p(), q: 1.0 - p, ln_eq, eq: None };
        s.promote();
        s
    }

    fn promote(&mut self) {
        if self.ln_eq > -600.0 {
            self.eq = Some(self.ln_eq.exp());
        }
    }

    fn value(&self) -> f64 {
        self.eq.unwrap_or(0.0)
    }

    /// From `n` to `n + 1`.
    fn advance(&mut self, n: u64) {
        let up = (n + 1) as f64;
        match self.eq.as_mut() {
            Some(eq) => *eq *= up / (up - self.k) * self.q,
            None => {
                self.ln_eq += (up / (up - self.k)).ln() + self.ln_q;
                self.promote();
            }
        }
    }
}

impl CountLaw {
    fn from_pmf(offset: u64, pmf: Vec<f64>) -> Self {
        let mut suffix = vec![0.0; pmf.len() + 1];
        for i in (0..pmf.len()).rev() {
            suffix[i] = suffix[i + 1] + pmf[i];
        }
        let tail = (1.0 - suffix[0]).max(0.0);
        suffix.pop();
        CountLaw { offset, pmf, suffix, tail }
    }

    pub fn point(n: u64) -> Self {
        Self::from_pmf(n, vec![1.0])
    }

    pub fn poisson(mean: f64) -> Self {
        if mean <= 0.0 {
            return Self::point(0);
        }
        let spread = 13.0 * mean.sqrt() + 30.0;
        let lo = (mean - spread).floor().max(0.0) as u64;
        let hi = (mean + spread).ceil() as u64;
        let pmf = (lo..=hi).map(|n| poisson_pmf(mean, n)).collect();
        Self::from_pmf(lo, pmf)
    }

    /// `P(N = n) = (1 - q) q^n`.
    pub fn geometric(q: f64) -> Self {
        assert!((0.0..1.0).contains(&q), "geometric ratio must lie in [0, 1)");
        if q == 0.0 {
            return Self::point(0);
        }
        let len = (TRUNCATION_TOL.ln() / q.ln()).ceil() as usize + 1;
        let mut pmf = Vec::with_capacity(len);
        let mut term = 1.0 - q;
        for _ in 0..len {
            pmf.push(term);
            term *= q;
        }
        Self::from_pmf(0, pmf)
    }

    /// Law given through its survival function `S(j) = P(N >= offset + j)`,
    /// with `S(0) = 1`, truncated once `S` drops below the tolerance.
    fn from_survival(offset: u64, survival: impl Fn(u64) -> f64) -> Self {
        let mut pmf = Vec::new();
        let mut j = 0u64;
        let mut s_cur = 1.0;
        loop {
            let s_next = survival(j + 1).min(s_cur);
            pmf.push(s_cur - s_next);
            if s_next < TRUNCATION_TOL {
                break;
            }
            s_cur = s_next;
            j += 1;
        }
        Self::from_pmf(offset, pmf)
    }

    /// Distribution of the sum of two independent counts.
    pub fn convolve(&self, other: &CountLaw) -> CountLaw {
        let mut pmf = vec![0.0; self.pmf.len() + other.pmf.len() - 1];
        for (i, a) in self.pmf.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.pmf.iter().enumerate() {
                pmf[i + j] += a * b;
            }
        }
        Self::from_pmf(self.offset + other.offset, pmf)
    }

    /// Arrivals in the window `(from, to]`.
    pub fn window(arrivals: &ArrivalProcess, from: f64, to: f64) -> Self {
        match *arrivals {
            ArrivalProcess::Linear { rate } => Self::point(
                ArrivalProcess::linear_count(rate, to).saturating_sub(ArrivalProcess::linear_count(rate, from)),
            ),
            ArrivalProcess::Poisson { rate } => Self::poisson(rate * (to - from)),
        }
    }

    /// Arrivals after `elapsed` until the next block, given no block so far.
    pub fn remaining_until_block(scenario: &Scenario, elapsed: f64) -> Result<Self> {
        scenario.interval.check_open(elapsed)?;
        Ok(match (scenario.interval, scenario.arrivals) {
            (BlockIntervalModel::Fixed { duration }, arrivals) => Self::window(&arrivals, elapsed, duration),
            (BlockIntervalModel::Exponential { rate: lambda }, ArrivalProcess::Poisson { rate: beta }) => {
                Self::geometric(beta / (lambda + beta))
            }
            (BlockIntervalModel::Exponential { rate: lambda }, ArrivalProcess::Linear { rate: beta }) => {
                if beta == 0.0 {
                    return Ok(Self::point(0));
                }
                let seen = ArrivalProcess::linear_count(beta, elapsed);
                // j more arrivals need the block no earlier than (seen + j) / beta
                Self::from_survival(0, |j| {
                    if j == 0 {
                        1.0
                    } else {
                        (-lambda * ((seen + j) as f64 / beta - elapsed).max(0.0)).exp()
                    }
                })
            }
        })
    }

    /// All arrivals since the last block until the next one, given no block
    /// by `elapsed`.
    pub fn total_until_block(scenario: &Scenario, elapsed: f64) -> Result<Self> {
        scenario.interval.check_open(elapsed)?;
        Ok(match (scenario.interval, scenario.arrivals) {
            (BlockIntervalModel::Fixed { duration }, arrivals) => Self::window(&arrivals, 0.0, duration),
            (BlockIntervalModel::Exponential { .. }, arrivals) => {
                let seen = Self::window(&arrivals, 0.0, elapsed);
                let rest = Self::remaining_until_block(scenario, elapsed)?;
                seen.convolve(&rest)
            }
        })
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn max_count(&self) -> u64 {
        self.offset + self.pmf.len() as u64 - 1
    }

    /// Mass dropped by truncation.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn pmf(&self, n: u64) -> f64 {
        if n < self.offset {
            return 0.0;
        }
        self.pmf.get((n - self.offset) as usize).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.pmf.iter().enumerate().map(move |(i, p)| (self.offset + i as u64, *p))
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(n, p)| n as f64 * p).sum()
    }

    /// `P(N < k)`.
    pub fn prob_below(&self, k: u64) -> f64 {
        self.iter().take_while(|(n, _)| *n < k).map(|(_, p)| p).sum()
    }

    /// `sum_n P(N = n) P(Bin(n, p) <= k)`: the chance that at most `k` of the
    /// counted transactions exceed a fee each outbids with probability `p`.
    pub fn prob_thinned_at_most(&self, p: f64, k: u64) -> f64 {
        if p <= 0.0 {
            return 1.0 - self.tail;
        }
        if p >= 1.0 {
            return self.iter().take_while(|(n, _)| *n <= k).map(|(_, w)| w).sum();
        }
        let mut total = 0.0;
        // counts up to k can never exceed k
        for (n, w) in self.iter() {
            if n > k {
                break;
            }
            total += w;
        }
        if self.max_count() <= k {
            return total;
        }
        // sweep n upward from k: cdf = P(Bin(n,p) <= k), eq = P(Bin(n,p) = k)
        let mut step = EqStep::new(p, k);
        let mut cdf = 1.0;
        let mut n = k;
        let start = self.offset.max(k + 1);
        while n < start {
            cdf -= p * step.value();
            step.advance(n);
            n += 1;
        }
        loop {
            let idx = (n - self.offset) as usize;
            let cdf_c = cdf.clamp(0.0, 1.0);
            total += self.pmf[idx] * cdf_c;
            if idx + 1 >= self.pmf.len() || cdf_c * self.suffix[idx + 1] < EARLY_STOP {
                break;
            }
            cdf -= p * step.value();
            step.advance(n);
            n += 1;
        }
        total.clamp(0.0, 1.0)
    }

    /// `P(K = j)` for `j = 0..=kmax`, where `K ~ Bin(N, p)` given the count `N`.
    pub fn thinned_pmf(&self, p: f64, kmax: u64) -> Vec<f64> {
        let mut out = vec![0.0; kmax as usize + 1];
        if p <= 0.0 {
            out[0] = 1.0 - self.tail;
            return out;
        }
        if p >= 1.0 {
            for (n, w) in self.iter() {
                if n <= kmax {
                    out[n as usize] += w;
                }
            }
            return out;
        }
        let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
        for (n, w) in self.iter() {
            if w == 0.0 {
                continue;
            }
            let ln_nf = ln_gamma(n as f64 + 1.0);
            for j in 0..=kmax.min(n) {
                let ln_c = ln_nf - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0);
                out[j as usize] += w * (ln_c + j as f64 * ln_p + (n - j) as f64 * ln_q).exp();
            }
        }
        out
    }
}
