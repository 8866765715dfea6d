//! Continuous-time Markov chain of one strategic user bumping fees against
//! `n - 1` semi-strategic users, in normalized fee units.

mod path;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use path::{simulate_occupancy, OccupancyEstimate};

use crate::error::{Error, Result};

/// Dense LU is used up to this many states; larger chains use Gauss-Seidel.
pub const DENSE_LIMIT: usize = 4096;
/// Largest tolerated balance violation and normalization error.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtmcParams {
    /// Transactions competing per round, the strategic one included.
    pub n: u32,
    /// Block capacity.
    pub m: u32,
    /// Valuation in bump increments.
    pub v_hat: u32,
    /// Observation rate of each ordinary user.
    pub gamma: f64,
    /// Bumping rate of the strategic user.
    pub gamma_s: f64,
    /// Block rate.
    pub lambda: f64,
    /// Size of one bump in fee units.
    pub eta: f64,
}

impl CtmcParams {
    pub fn new(n: u32, m: u32, v_hat: u32, gamma: f64, gamma_s: f64, lambda: f64) -> Result<Self> {
        let p = CtmcParams { n, m, v_hat, gamma, gamma_s, lambda, eta: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n <= self.m {
            return Err(Error::config(format!("need n > m >= 1, got n={} m={}", self.n, self.m)));
        }
        if self.v_hat < 1 {
            return Err(Error::config("normalized valuation must be at least 1"));
        }
        for (name, r) in [("gamma", self.gamma), ("gamma_s", self.gamma_s), ("lambda", self.lambda), ("eta", self.eta)] {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        1 + 2 * self.levels() * (self.m as usize + 1)
    }

    fn levels(&self) -> usize {
        self.m as usize * self.v_hat as usize
    }

    /// Index of `(k, b, i)` inside the pending (or generated) block.
    fn offset(&self, k: u32, b: u32, i: u32) -> usize {
        (((b - 1) * self.m + (k - 1)) * (self.m + 1) + i) as usize
    }

    pub fn index_of(&self, state: CtmcState) -> Option<usize> {
        let half = self.levels() * (self.m as usize + 1);
        let ok = |k: u32, b: u32, i: u32| (1..=self.m).contains(&k) && (1..=self.v_hat).contains(&b) && i <= self.m;
        match state {
            CtmcState::Zero => Some(0),
            CtmcState::Pending { k, b, i } if ok(k, b, i) => Some(1 + self.offset(k, b, i)),
            CtmcState::Generated { k, b, i } if ok(k, b, i) => Some(1 + half + self.offset(k, b, i)),
            _ => None,
        }
    }

    /// Whether the strategic transaction currently sits in the top `m`.
    fn sp_included(&self, k: u32, b: u32, i: u32) -> bool {
        if b == 1 {
            i < k
        } else {
            i < self.m
        }
    }

    /// Ordinary users not in the top `m` (including those yet to post).
    fn behind(&self, k: u32, b: u32, i: u32) -> u32 {
        let sp = self.sp_included(k, b, i) as u32;
        if b == 1 {
            (self.n - 1) - (k - sp)
        } else {
            (self.n - 1) - self.m + sp
        }
    }

    /// Level reached by one more bump, if bumping is still allowed.
    fn next_level(&self, k: u32, b: u32) -> Option<(u32, u32)> {
        if k < self.m {
            Some((k + 1, b))
        } else if b < self.v_hat {
            Some((1, b + 1))
        } else {
            None
        }
    }
}

/// `Pending`: the round is running at top fee `b` held by `k` transactions,
/// with `i` fee postings since the strategic user's last one.
/// `Generated`: a block was just produced in that configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CtmcState {
    Zero,
    Pending { k: u32, b: u32, i: u32 },
    Generated { k: u32, b: u32, i: u32 },
}

impl fmt::Display for CtmcState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CtmcState::Zero => f.write_str("0"),
            CtmcState::Pending { k, b, i } => write!(f, "Q({k},{b},{i})"),
            CtmcState::Generated { k, b, i } => write!(f, "S({k},{b},{i})"),
        }
    }
}

/// Zero, then pending states by `(b, k, i)`, then generated states in the same order.
pub fn enumerate_states(params: &CtmcParams) -> Vec<CtmcState> {
    let mut pending = Vec::with_capacity(params.state_count() / 2);
    for b in 1..=params.v_hat {
        for k in 1..=params.m {
            for i in 0..=params.m {
                pending.push((k, b, i));
            }
        }
    }
    std::iter::once(CtmcState::Zero)
        .chain(pending.iter().map(|&(k, b, i)| CtmcState::Pending { k, b, i }))
        .chain(pending.iter().map(|&(k, b, i)| CtmcState::Generated { k, b, i }))
        .collect()
}

/// Transition structure of the chain. Self-loops (an empty block in state
/// zero) are left out.
#[derive(Debug, Clone)]
pub struct BalanceSystem {
    pub params: CtmcParams,
    pub states: Vec<CtmcState>,
    /// Outgoing `(target, rate)` per state.
    pub outgoing: Vec<Vec<(usize, f64)>>,
    /// Incoming `(source, rate)` per state.
    pub incoming: Vec<Vec<(usize, f64)>>,
    /// Total exit rate per state.
    pub exit: Vec<f64>,
}

pub fn build_balance_system(params: &CtmcParams) -> Result<BalanceSystem> {
    params.validate()?;
    let p = *params;
    let states = enumerate_states(&p);
    let idx = |s: CtmcState| p.index_of(s).expect("state in range");
    let mut outgoing: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states.len()];
    let restart = |out: &mut Vec<(usize, f64)>| {
        out.push((idx(CtmcState::Pending { k: 1, b: 1, i: 1 }), (p.n - 1) as f64 * p.gamma));
        out.push((idx(CtmcState::Pending { k: 1, b: 1, i: 0 }), p.gamma_s));
    };
    for (from, state) in states.iter().enumerate() {
        let out = &mut outgoing[from];
        match *state {
            CtmcState::Zero => restart(out),
            CtmcState::Generated { .. } => {
                restart(out);
                out.push((0, p.lambda));
            }
            CtmcState::Pending { k, b, i } => {
                if let Some((k2, b2)) = p.next_level(k, b) {
                    let behind = p.behind(k, b, i);
                    if behind > 0 {
                        let i2 = (i + 1).min(p.m);
                        out.push((idx(CtmcState::Pending { k: k2, b: b2, i: i2 }), behind as f64 * p.gamma));
                    }
                    if !p.sp_included(k, b, i) {
                        out.push((idx(CtmcState::Pending { k: k2, b: b2, i: 0 }), p.gamma_s));
                    }
                }
                out.push((idx(CtmcState::Generated { k, b, i }), p.lambda));
            }
        }
    }
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states.len()];
    for (from, out) in outgoing.iter().enumerate() {
        for &(to, rate) in out {
            incoming[to].push((from, rate));
        }
    }
    let exit = outgoing.iter().map(|o| o.iter().map(|(_, r)| r).sum()).collect();
    Ok(BalanceSystem { params: p, states, outgoing, incoming, exit })
}

impl BalanceSystem {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest `|inflow - outflow|` over all states.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        (0..self.len())
            .map(|j| {
                let inflow: f64 = self.incoming[j].iter().map(|&(i, r)| pi[i] * r).sum();
                (inflow - pi[j] * self.exit[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Balance equations with the first one replaced by normalization.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            a[(j, j)] = -self.exit[j];
            for &(i, r) in &self.incoming[j] {
                a[(j, i)] += r;
            }
        }
        for i in 0..n {
            a[(0, i)] = 1.0;
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    pub residual: f64,
}

impl StationaryDistribution {
    pub fn prob(&self, params: &CtmcParams, state: CtmcState) -> f64 {
        params.index_of(state).map_or(0.0, |i| self.probabilities[i])
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

pub fn solve_stationary(system: &BalanceSystem) -> Result<StationaryDistribution> {
    let mut pi = if system.len() <= DENSE_LIMIT { solve_dense(system)? } else { solve_gauss_seidel(system) };
    for x in pi.iter_mut() {
        if *x < 0.0 {
            if *x < -RESIDUAL_TOL {
                return Err(Error::Numerical(format!("negative stationary probability {x}")));
            }
            *x = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    let residual = system.residual(&pi);
    let norm_err = (pi.iter().sum::<f64>() - 1.0).abs();
    if !(residual <= RESIDUAL_TOL && norm_err <= RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "stationary solve did not converge: residual {residual:e}, normalization error {norm_err:e}, {} states",
            system.len()
        )));
    }
    Ok(StationaryDistribution { probabilities: pi, residual })
}

fn solve_dense(system: &BalanceSystem) -> Result<Vec<f64>> {
    let a = system.dense_matrix();
    let mut rhs = DVector::zeros(system.len());
    rhs[0] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical(format!("balance matrix is singular ({} states)", system.len())))?;
    for _ in 0..3 {
        let r = &rhs - &a * &x;
        if r.amax() <= RESIDUAL_TOL * 1e-3 {
            break;
        }
        if let Some(d) = lu.solve(&r) {
            x += d;
        }
    }
    Ok(x.iter().copied().collect())
}

/// Sweeps in index order, which follows the direction of the bumps, so few
/// sweeps are needed.
fn solve_gauss_seidel(system: &BalanceSystem) -> Vec<f64> {
    let n = system.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        for j in 0..n {
            let inflow: f64 = system.incoming[j].iter().map(|&(i, r)| pi[i] * r).sum();
            pi[j] = inflow / system.exit[j];
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= total);
        if system.residual(&pi) <= RESIDUAL_TOL * 1e-2 {
            break;
        }
    }
    pi
}

pub fn solve(params: &CtmcParams) -> Result<StationaryDistribution> {
    solve_stationary(&build_balance_system(params)?)
}

/// Which generated states credit the strategic user.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    /// Included while among the last `m` postings: at the top fee `b` if
    /// `i < k`, one level below (paying `b - 1`) if `k <= i < m`.
    #[default]
    Standing,
    /// Only a strategic fee at the top level counts.
    TopLevelOnly,
}

/// Fee paid by the strategic user in a generated state, or `None` if excluded.
fn payment(params: &CtmcParams, k: u32, b: u32, i: u32, rule: Attribution) -> Option<u32> {
    if i < k {
        Some(b)
    } else if rule == Attribution::Standing && b >= 2 && i < params.m {
        Some(b - 1)
    } else {
        None
    }
}

/// Expected utility of the strategic user per block.
pub fn expected_utility_per_round(params: &CtmcParams, dist: &StationaryDistribution) -> f64 {
    expected_utility_with(params, dist, Attribution::Standing)
}

pub fn expected_utility_with(params: &CtmcParams, dist: &StationaryDistribution, rule: Attribution) -> f64 {
    let (y, rounds) = per_round(params, dist, rule, |paid| (params.v_hat - paid) as f64);
    params.eta * y / rounds
}

/// Chance per block that the strategic transaction is included.
pub fn win_probability_per_round(params: &CtmcParams, dist: &StationaryDistribution) -> f64 {
    let (y, rounds) = per_round(params, dist, Attribution::Standing, |_| 1.0);
    y / rounds
}

fn per_round(
    params: &CtmcParams,
    dist: &StationaryDistribution,
    rule: Attribution,
    value: impl Fn(u32) -> f64,
) -> (f64, f64) {
    let mut y = 0.0;
    let mut rounds = dist.probabilities[0];
    let states = enumerate_states(params);
    for (s, p) in states.iter().zip(&dist.probabilities) {
        if let CtmcState::Generated { k, b, i } = *s {
            rounds += p;
            if let Some(paid) = payment(params, k, b, i, rule) {
                y += value(paid) * p;
            }
        }
    }
    (y, rounds)
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    GammaS,
    Gamma,
    VHat,
    M,
    N,
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gamma_s" | "gamma-s" => Ok(SweepVar::GammaS),
            "gamma" => Ok(SweepVar::Gamma),
            "v_hat" | "v-hat" | "vhat" => Ok(SweepVar::VHat),
            "m" => Ok(SweepVar::M),
            "n" => Ok(SweepVar::N),
            other => Err(Error::Parse(format!("unknown sweep variable '{other}' (gamma_s, gamma, v_hat, m, n)"))),
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVar::GammaS => "gamma_s",
            SweepVar::Gamma => "gamma",
            SweepVar::VHat => "v_hat",
            SweepVar::M => "m",
            SweepVar::N => "n",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub utility: f64,
    pub residual: f64,
    pub state_count: usize,
}

impl CtmcParams {
    /// Copy with one parameter replaced; integer parameters must be whole.
    pub fn with_var(&self, var: SweepVar, value: f64) -> Result<Self> {
        let mut p = *self;
        let whole = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as u32)
            } else {
                Err(Error::config(format!("{var} must be a whole number, got {value}")))
            }
        };
        match var {
            SweepVar::GammaS => p.gamma_s = value,
            SweepVar::Gamma => p.gamma = value,
            SweepVar::VHat => p.v_hat = whole()?,
            SweepVar::M => p.m = whole()?,
            SweepVar::N => p.n = whole()?,
        }
        p.validate()?;
        Ok(p)
    }
}

/// Re-solves the chain at every grid value of `var`.
pub fn sweep(params: &CtmcParams, var: SweepVar, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    grid.par_iter()
        .map(|&value| {
            let p = params.with_var(var, value)?;
            let dist = solve(&p)?;
            Ok(SweepPoint {
                value,
                utility: expected_utility_per_round(&p, &dist),
                residual: dist.residual,
                state_count: p.state_count(),
            })
        })
        .collect()
}
