//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver or the rate evaluator.
#![allow(dead_code)]

use edgecache::{CoverageProfile, GameConfig, LibraryConfig, PopularityDist};

pub fn game(alpha: f64, p: Vec<f64>, gamma: Vec<f64>, m: f64) -> GameConfig {
    let lib = LibraryConfig::new(p.len(), 1, 100).unwrap();
    GameConfig::new(
        alpha,
        lib,
        PopularityDist::new(p).unwrap(),
        CoverageProfile::new(gamma).unwrap(),
        m,
    )
    .unwrap()
}

/// `sum_d gamma_d * max(1 - d x, 0)` written out directly.
pub fn deficit(gamma: &[f64], x: f64) -> f64 {
    let mut total = 0.0;
    for (i, g) in gamma.iter().enumerate() {
        let d = (i + 1) as f64;
        let miss = 1.0 - d * x;
        if miss > 0.0 {
            total += g * miss;
        }
    }
    total
}

/// Leader objective with the adversaries on the least-cached file.
pub fn objective(alpha: f64, p: &[f64], gamma: &[f64], q: &[f64]) -> f64 {
    let legit: f64 = p
        .iter()
        .zip(q)
        .map(|(pj, qj)| pj * deficit(gamma, *qj))
        .sum();
    let qmin = q.iter().cloned().fold(f64::INFINITY, f64::min);
    (1.0 - alpha) * legit + alpha * deficit(gamma, qmin)
}

/// Exhaustive search over the grid `{0, step, 2 step, ..., 1}^N` restricted to
/// `sum q <= M`.
pub fn brute_force(alpha: f64, p: &[f64], gamma: &[f64], m: f64, step: f64) -> (f64, Vec<f64>) {
    let levels = (1.0 / step).round() as usize;
    let n = p.len();
    let mut best = (f64::INFINITY, vec![0.0; n]);
    let mut idx = vec![0usize; n];
    fn rec(
        pos: usize,
        used: usize,
        idx: &mut Vec<usize>,
        levels: usize,
        budget: usize,
        eval: &mut dyn FnMut(&[usize]),
    ) {
        if pos == idx.len() {
            eval(idx);
            return;
        }
        for k in 0..=levels.min(budget - used) {
            idx[pos] = k;
            rec(pos + 1, used + k, idx, levels, budget, eval);
        }
    }
    let budget = ((m / step) + 1e-9).floor() as usize;
    let mut eval = |ks: &[usize]| {
        let q: Vec<f64> = ks.iter().map(|&k| k as f64 / levels as f64).collect();
        let v = objective(alpha, p, gamma, &q);
        if v < best.0 {
            best = (v, q);
        }
    };
    rec(0, 0, &mut idx, levels, budget, &mut eval);
    best
}

/// Exact minimizer exploiting the problem structure: for a fixed floor `mu`
/// the legitimate part is a separable convex resource allocation solved by
/// filling linear pieces in order of marginal gain; the floor itself is found
/// by golden-section search on the convex outer function.
pub fn structured_optimum(alpha: f64, p: &[f64], gamma: &[f64], m: f64) -> (f64, Vec<f64>) {
    let n = p.len();
    let s = gamma.len();
    // breakpoints 0 < 1/S < ... < 1/2 < 1, slope magnitude on each piece
    let mut bps: Vec<f64> = (1..=s).rev().map(|k| 1.0 / k as f64).collect();
    bps.insert(0, 0.0);
    let slope_on = |lo: f64| -> f64 {
        gamma
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if 1.0 - (i + 1) as f64 * (lo + 1e-15) > 0.0 {
                    (i + 1) as f64 * g
                } else {
                    0.0
                }
            })
            .sum()
    };
    let inner = |mu: f64| -> (f64, Vec<f64>) {
        let mut q = vec![mu; n];
        let mut budget = m - mu * n as f64;
        let mut pieces: Vec<(f64, usize, f64)> = Vec::new();
        for (j, &pj) in p.iter().enumerate() {
            for w in bps.windows(2) {
                let (lo, hi) = (w[0].max(mu), w[1]);
                if hi > lo {
                    pieces.push((pj * slope_on(lo), j, hi - lo));
                }
            }
        }
        pieces.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for (gain, j, len) in pieces {
            if budget <= 0.0 || gain <= 0.0 {
                break;
            }
            let take = len.min(budget);
            q[j] += take;
            budget -= take;
        }
        // convex in mu: partial minimum of the legitimate part plus the floor term
        let legit: f64 = p
            .iter()
            .zip(&q)
            .map(|(pj, qj)| pj * deficit(gamma, *qj))
            .sum();
        ((1.0 - alpha) * legit + alpha * deficit(gamma, mu), q)
    };
    let (mut lo, mut hi) = (0.0, (m / n as f64).min(1.0));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if inner(a).0 <= inner(b).0 {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mut best = inner(0.5 * (lo + hi));
    for mu in [0.0, (m / n as f64).min(1.0)] {
        let cand = inner(mu);
        if cand.0 < best.0 {
            best = cand;
        }
    }
    (objective(alpha, p, gamma, &best.1), best.1)
}

/// Error-free transformation sum (double-double accumulation).
pub fn dd_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for t in terms {
        let s = hi + t;
        let bp = s - hi;
        let err = (hi - (s - bp)) + (t - bp);
        hi = s;
        lo += err;
    }
    hi + lo
}

/// SplitMix64, unrelated to the ChaCha generator used by the library.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Coverage profile by a second Monte Carlo: points are drawn in the cell
/// centered at the origin and covered if within `r` of any of the four
/// corners at `(+-s/2, +-s/2)`.
pub fn mc_gamma_oracle(spacing: f64, r: f64, samples: u64, seed: u64) -> [f64; 4] {
    let mut rng = SplitMix64(seed);
    let h = spacing / 2.0;
    let mut counts = [0u64; 5];
    for _ in 0..samples {
        let x = (rng.unit() - 0.5) * spacing;
        let y = (rng.unit() - 0.5) * spacing;
        let mut c = 0;
        for sx in [-h, h] {
            for sy in [-h, h] {
                if (x - sx).hypot(y - sy) <= r {
                    c += 1;
                }
            }
        }
        counts[c] += 1;
    }
    let total = samples as f64;
    [
        counts[1] as f64 / total,
        counts[2] as f64 / total,
        counts[3] as f64 / total,
        counts[4] as f64 / total,
    ]
}
