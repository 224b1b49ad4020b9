//! Request-level Monte Carlo simulation of the coded caching scheme.
//!
//! Placement: each file is split into `n` fragments and MDS-encoded into
//! `n + (S - 1) * m_j` packets; every SBS gets `m_j` distinct packets and the
//! MBS keeps the other `n - m_j`. Delivery: a user covered by `d` SBSs collects
//! `d * m_j` distinct packets and the MBS sends `max(n - d * m_j, 0)` more over
//! the backhaul.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::best_response;
use crate::model::{quantize_placement, GameConfig, Placement};

/// Requests simulated per independently seeded batch.
const BATCH: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPlacement {
    pub n: usize,
    /// Packets of each file stored at every SBS.
    pub m: Vec<usize>,
    /// Packets of each file the MBS keeps back, `n - m_j`.
    pub mbs_reserve: Vec<usize>,
    /// Distinct SBSs a user can combine packets from.
    pub sbs_count: usize,
}

impl CodedPlacement {
    pub fn new(m: Vec<usize>, n: usize, sbs_count: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("fragments per file must be at least 1"));
        }
        if sbs_count == 0 {
            return Err(Error::invalid("at least one SBS is needed"));
        }
        if let Some(&mj) = m.iter().find(|&&mj| mj > n) {
            return Err(Error::invalid(format!("{mj} packets exceed n = {n}")));
        }
        let mbs_reserve = m.iter().map(|&mj| n - mj).collect();
        Ok(Self {
            n,
            m,
            mbs_reserve,
            sbs_count,
        })
    }

    /// Total coded packets generated for file `j`.
    pub fn coded_packets(&self, j: usize) -> usize {
        self.n + (self.sbs_count - 1) * self.m[j]
    }

    /// Packets the MBS must send for a request of file `j` covered by `d` SBSs.
    pub fn backhaul_packets(&self, j: usize, d: usize) -> usize {
        self.n.saturating_sub(d * self.m[j])
    }
}

/// Checks the MDS counting argument for every file at coverage `d`: the SBSs
/// contribute `d * m_j` distinct packets, and whenever that falls short of `n`
/// the MBS reserve holds enough unsent packets to complete the file.
pub fn packet_accounting_check(placement: &CodedPlacement, d: usize) -> bool {
    if d == 0 || d > placement.sbs_count {
        return false;
    }
    (0..placement.m.len()).all(|j| {
        let n = placement.n;
        let from_sbs = d * placement.m[j];
        let reserve = placement.mbs_reserve[j];
        // every packet ever generated is either at an SBS or held by the MBS
        let generated = placement.sbs_count * placement.m[j] + reserve;
        if generated != placement.coded_packets(j) || reserve + placement.m[j] != n {
            return false;
        }
        if from_sbs >= n {
            return true;
        }
        let needed = n - from_sbs;
        needed <= reserve && from_sbs + needed.min(reserve) == n
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub requests: u64,
    /// Mean fraction of a file fetched over the backhaul per request.
    pub backhaul_fraction_mean: f64,
    pub backhaul_fraction_stderr: f64,
    /// `per_coverage_counts[d - 1]`: requests from users covered by `d` SBSs.
    pub per_coverage_counts: Vec<u64>,
}

#[derive(Clone)]
struct Accumulator {
    count: u64,
    sum: f64,
    sum_sq: f64,
    per_coverage: Vec<u64>,
}

impl Accumulator {
    fn new(s: usize) -> Self {
        Self {
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
            per_coverage: vec![0; s],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.per_coverage
            .iter_mut()
            .zip(other.per_coverage)
            .for_each(|(a, b)| *a += b);
        self
    }
}

/// Simulates `num_requests` requests against placement `q`.
///
/// Each request comes from an adversary with probability `alpha`. Legitimate
/// users draw a file from the popularity law, adversaries request the best
/// response to the quantized cache content `m / n`. The coverage count is drawn
/// from the coverage profile. Requests are processed in fixed batches seeded
/// from `seed` on stream `batch_index`, so the report depends only on the
/// inputs, not on thread scheduling.
pub fn simulate(
    q: &Placement,
    cfg: &GameConfig,
    n: usize,
    num_requests: u64,
    seed: u64,
) -> Result<SimReport> {
    if num_requests == 0 {
        return Err(Error::invalid("at least one request is needed"));
    }
    if q.num_files() != cfg.num_files() {
        return Err(Error::DimensionMismatch {
            expected: cfg.num_files(),
            got: q.num_files(),
        });
    }
    let s = cfg.coverage.max_coverage();
    let m = quantize_placement(q, n, Some(&cfg.popularity))?;
    let coded = CodedPlacement::new(m.clone(), n, s)?;
    let quantized = Placement::from_packets(&m, n, q.cache_size())?;
    let (target, _) = best_response(&quantized);

    let files = WeightedIndex::new(cfg.popularity.probs())
        .map_err(|e| Error::invalid(format!("popularity: {e}")))?;
    let coverage = WeightedIndex::new(cfg.coverage.gamma())
        .map_err(|e| Error::invalid(format!("coverage profile: {e}")))?;
    let alpha = cfg.alpha;
    let nf = n as f64;

    let batches = num_requests.div_ceil(BATCH);
    let acc = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut acc = Accumulator::new(s);
            for _ in 0..BATCH.min(num_requests - b * BATCH) {
                let adversary = rng.random_bool(alpha);
                let file = if adversary {
                    target
                } else {
                    files.sample(&mut rng)
                };
                let d = coverage.sample(&mut rng) + 1;
                let x = coded.backhaul_packets(file, d) as f64 / nf;
                acc.count += 1;
                acc.sum += x;
                acc.sum_sq += x * x;
                acc.per_coverage[d - 1] += 1;
            }
            acc
        })
        .reduce(|| Accumulator::new(s), Accumulator::merge);

    let count = acc.count as f64;
    let mean = acc.sum / count;
    let stderr = if acc.count > 1 {
        let var = ((acc.sum_sq - count * mean * mean) / (count - 1.0)).max(0.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    Ok(SimReport {
        requests: acc.count,
        backhaul_fraction_mean: mean,
        backhaul_fraction_stderr: stderr,
        per_coverage_counts: acc.per_coverage,
    })
}
