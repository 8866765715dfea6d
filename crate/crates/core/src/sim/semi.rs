use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::{report, Outcome, SimulationReport};
use crate::ctmc::CtmcParams;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Posted fee of one user; `seq` orders postings so later ones win ties.
#[derive(Debug, Clone, Copy)]
struct Post {
    fee: u32,
    seq: u64,
}

struct Round {
    /// Index 0 is the strategic user.
    posts: Vec<Option<Post>>,
    m: usize,
    seq: u64,
    /// Whether each user is currently in the top `m`; recomputed on change.
    top: Vec<bool>,
    threshold: u32,
}

impl Round {
    fn new(n: usize, m: usize) -> Self {
        Round { posts: vec![None; n], m, seq: 0, top: vec![false; n], threshold: 0 }
    }

    fn refresh(&mut self) {
        let mut ranked: Vec<(usize, Post)> =
            self.posts.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
        ranked.sort_by(|a, b| b.1.fee.cmp(&a.1.fee).then(b.1.seq.cmp(&a.1.seq)));
        self.top.iter_mut().for_each(|t| *t = false);
        for (i, _) in ranked.iter().take(self.m) {
            self.top[*i] = true;
        }
        self.threshold = if ranked.len() >= self.m { ranked[self.m - 1].1.fee } else { 0 };
    }

    /// Bumps `user` to the threshold plus one if it is behind and the new
    /// fee stays within `cap`.
    fn try_bump(&mut self, user: usize, cap: u32) {
        if self.top[user] {
            return;
        }
        let fee = self.threshold + 1;
        if fee > cap {
            return;
        }
        self.seq += 1;
        self.posts[user] = Some(Post { fee, seq: self.seq });
        self.refresh();
    }
}

/// Simulates independent rounds from an empty mempool until a block; reports
/// the strategic user's utility per round in fee units.
pub fn simulate_semi_strategic(params: &CtmcParams, trials: u64, seed: u64) -> Result<SimulationReport> {
    params.validate()?;
    if trials == 0 {
        return Err(Error::domain("need at least one round"));
    }
    let start = Instant::now();
    let p = *params;
    let n = p.n as usize;
    let ordinary_rate = (p.n - 1) as f64 * p.gamma;
    let total = p.lambda + p.gamma_s + ordinary_rate;
    let outcomes: Vec<Outcome> = (0..trials)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r);
            let mut round = Round::new(n, p.m as usize);
            loop {
                // next event of the exponential race
                let u: f64 = rng.gen::<f64>() * total;
                if u < p.lambda {
                    break;
                } else if u < p.lambda + p.gamma_s {
                    round.try_bump(0, p.v_hat);
                } else {
                    let user = 1 + rng.gen_range(0..n - 1);
                    round.try_bump(user, p.v_hat);
                }
            }
            match round.posts[0] {
                Some(post) if round.top[0] => {
                    Outcome { utility: p.eta * (p.v_hat - post.fee) as f64, included: true }
                }
                _ => Outcome::default(),
            }
        })
        .collect();
    Ok(report(&outcomes, seed, start.elapsed(), 0))
}
