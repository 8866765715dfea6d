//! One-dimensional maximisation of piecewise-smooth utility curves over a fee
//! interval. Jumps may only occur at known breakpoints.

/// Default number of evenly spaced grid points.
pub const GRID_POINTS: usize = 512;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
/// Pieces refined after the grid pass, best first.
const PIECES_REFINED: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub arg: f64,
    pub value: f64,
}

/// Maximises `f` over `[lo, hi]`. `breaks` lists points where `f` may jump
/// (right-continuous there). Among equal values the smallest argument wins.
pub fn maximize(lo: f64, hi: f64, breaks: &[f64], grid: usize, f: impl Fn(f64) -> f64) -> Maximum {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|x| *x > lo && *x <= hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut xs: Vec<f64> = (0..grid.max(2))
        .map(|i| lo + (hi - lo) * i as f64 / (grid.max(2) - 1) as f64)
        .collect();
    xs.extend_from_slice(&cuts);
    xs.push(hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let vals: Vec<f64> = xs.iter().map(|x| f(*x)).collect();
    let piece_of = |x: f64| cuts.partition_point(|c| *c <= x);

    let mut best = Maximum { arg: xs[0], value: vals[0] };
    for (x, v) in xs.iter().zip(&vals) {
        if *v > best.value {
            best = Maximum { arg: *x, value: *v };
        }
    }
    if hi <= lo {
        return best;
    }

    // best grid index per piece
    let mut piece_best: Vec<(usize, usize)> = Vec::new();
    for i in 0..xs.len() {
        let p = piece_of(xs[i]);
        match piece_best.last_mut() {
            Some((pp, bi)) if *pp == p => {
                if vals[i] > vals[*bi] {
                    *bi = i;
                }
            }
            _ => piece_best.push((p, i)),
        }
    }
    piece_best.sort_by(|a, b| vals[b.1].total_cmp(&vals[a.1]).then(a.1.cmp(&b.1)));

    let scale = (hi - lo).abs().max(hi.abs()).max(1e-300);
    for &(p, i) in piece_best.iter().take(PIECES_REFINED) {
        let piece_lo = if p == 0 { lo } else { cuts[p - 1] };
        let piece_hi = cuts.get(p).copied().unwrap_or(f64::INFINITY).min(hi);
        let left = if i > 0 && piece_of(xs[i - 1]) == p { xs[i - 1] } else { piece_lo };
        let mut right = if i + 1 < xs.len() && piece_of(xs[i + 1]) == p { xs[i + 1] } else { piece_hi };
        if right >= piece_hi && piece_hi < hi {
            // stay strictly left of the next jump
            right = piece_hi - scale * 1e-13;
        }
        if right <= left {
            continue;
        }
        let m = golden(left, right, scale * 1e-12, &f);
        if m.value > best.value {
            best = m;
        }
    }
    best
}

fn golden(mut a: f64, mut b: f64, tol: f64, f: &impl Fn(f64) -> f64) -> Maximum {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fd > fc { Maximum { arg: d, value: fd } } else { Maximum { arg: c, value: fc } };
    for _ in 0..200 {
        if (b - a) <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
            if fc > best.value {
                best = Maximum { arg: c, value: fc };
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
            if fd > best.value {
                best = Maximum { arg: d, value: fd };
            }
        }
    }
    best
}
