//! Core domain types shared by every other module.
//!
//! Rates throughout the crate are normalized per file: a rate of `0.25` means
//! a quarter of a file travels over the backhaul per request on average. The
//! file size in bits is carried for reporting only.

use crate::error::{Error, Result};

/// Absolute tolerance used when checking that a probability vector sums to one.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Slack allowed on the cache capacity constraint `sum(q) <= M`.
pub const CAPACITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LibraryConfig {
    pub num_files: usize,
    /// Informational only; all rates are normalized per file.
    pub file_size_bits: u64,
    /// Number of MDS source fragments per file.
    pub fragments_per_file: usize,
}

impl LibraryConfig {
    pub fn new(num_files: usize, file_size_bits: u64, fragments_per_file: usize) -> Result<Self> {
        if num_files == 0 {
            return Err(Error::invalid("num_files must be at least 1"));
        }
        if file_size_bits == 0 {
            return Err(Error::invalid("file_size_bits must be at least 1"));
        }
        if fragments_per_file == 0 {
            return Err(Error::invalid("fragments_per_file must be at least 1"));
        }
        Ok(Self {
            num_files,
            file_size_bits,
            fragments_per_file,
        })
    }
}

/// Request probabilities of legitimate users over the library.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityDist {
    probs: Vec<f64>,
}

impl PopularityDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_distribution(&probs, "popularity")?;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_files(&self) -> usize {
        self.probs.len()
    }

    /// File indices ordered by non-increasing popularity; equal popularity
    /// keeps index order.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]));
        idx
    }
}

/// `gamma[d - 1]` is the probability that a user is covered by exactly `d` SBSs.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageProfile {
    gamma: Vec<f64>,
}

impl CoverageProfile {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        check_distribution(&gamma, "coverage profile")?;
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Maximum number of SBSs that can serve one user (`S`).
    pub fn max_coverage(&self) -> usize {
        self.gamma.len()
    }

    /// `(d, gamma_d)` pairs with `d` starting at one.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.gamma.iter().enumerate().map(|(i, &g)| (i + 1, g))
    }

    /// `sum_d gamma_d * max(1 - d*x, 0)`: the expected fraction of a file the
    /// MBS has to send when a fraction `x` of it sits in every SBS cache.
    pub fn deficit(&self, x: f64) -> f64 {
        self.iter()
            .map(|(d, g)| g * (1.0 - d as f64 * x).max(0.0))
            .sum()
    }
}

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{what} must not be empty")));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::invalid(format!(
            "{what} entries must be finite and non-negative, found {x}"
        )));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::invalid(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Proportional placement: `q[j]` is the fraction of file `j` held by every SBS.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    q: Vec<f64>,
    cache_size: f64,
}

impl Placement {
    pub fn new(q: Vec<f64>, cache_size: f64) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::invalid("placement must cover at least one file"));
        }
        if !(cache_size.is_finite() && cache_size > 0.0) {
            return Err(Error::invalid(format!(
                "cache size must be positive, got {cache_size}"
            )));
        }
        if let Some(x) = q.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid(format!(
                "placement entry {x} outside [0, 1]"
            )));
        }
        let used: f64 = q.iter().sum();
        if used > cache_size + CAPACITY_TOL {
            return Err(Error::invalid(format!(
                "placement uses {used} files of cache, capacity is {cache_size}"
            )));
        }
        Ok(Self { q, cache_size })
    }

    /// Every file gets the same share `min(M/N, 1)`.
    pub fn uniform(num_files: usize, cache_size: f64) -> Result<Self> {
        if num_files == 0 {
            return Err(Error::invalid("num_files must be at least 1"));
        }
        let share = (cache_size / num_files as f64).min(1.0);
        Self::new(vec![share; num_files], cache_size)
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn cache_size(&self) -> f64 {
        self.cache_size
    }

    pub fn num_files(&self) -> usize {
        self.q.len()
    }

    pub fn min(&self) -> f64 {
        self.q.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn used(&self) -> f64 {
        self.q.iter().sum()
    }

    /// Infinity-norm distance between two placements of the same length.
    pub fn distance(&self, other: &Placement) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Placement `m / n` for integer packet counts.
    pub fn from_packets(m: &[usize], n: usize, cache_size: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("fragments per file must be at least 1"));
        }
        Self::new(m.iter().map(|&k| k as f64 / n as f64).collect(), cache_size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub alpha: f64,
    pub library: LibraryConfig,
    pub popularity: PopularityDist,
    pub coverage: CoverageProfile,
    pub cache_size: f64,
}

impl GameConfig {
    /// `cache_size >= num_files` is accepted and means every file fits entirely.
    pub fn new(
        alpha: f64,
        library: LibraryConfig,
        popularity: PopularityDist,
        coverage: CoverageProfile,
        cache_size: f64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if !(cache_size.is_finite() && cache_size > 0.0) {
            return Err(Error::invalid(format!(
                "cache size must be positive, got {cache_size}"
            )));
        }
        if popularity.num_files() != library.num_files {
            return Err(Error::DimensionMismatch {
                expected: library.num_files,
                got: popularity.num_files(),
            });
        }
        Ok(Self {
            alpha,
            library,
            popularity,
            coverage,
            cache_size,
        })
    }

    pub fn num_files(&self) -> usize {
        self.library.num_files
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            ..self.clone()
        })
    }

    pub fn with_cache_size(&self, cache_size: f64) -> Result<Self> {
        Self::new(
            self.alpha,
            self.library,
            self.popularity.clone(),
            self.coverage.clone(),
            cache_size,
        )
    }

    pub fn with_coverage(&self, coverage: CoverageProfile) -> Self {
        Self {
            coverage,
            ..self.clone()
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    pub r_legit: f64,
    pub r_adv: f64,
    pub r_total: f64,
}

/// Zipf law `p_j = j^-z / sum_i i^-z`, files ranked from most to least popular.
pub fn zipf_popularity(num_files: usize, exponent: f64) -> Result<PopularityDist> {
    if num_files == 0 {
        return Err(Error::invalid("zipf needs at least one file"));
    }
    if !(exponent.is_finite() && exponent >= 0.0) {
        return Err(Error::invalid(format!(
            "zipf exponent must be non-negative, got {exponent}"
        )));
    }
    let weights: Vec<f64> = (1..=num_files)
        .map(|j| (j as f64).powf(-exponent))
        .collect();
    let norm: f64 = weights.iter().sum();
    PopularityDist::new(weights.into_iter().map(|w| w / norm).collect())
}

/// Integer packet counts per file for `n` fragments per file.
///
/// Entries are rounded to nearest (`floor(q*n + 0.5)`). If rounding pushed the
/// total past `floor(M*n)`, files that were rounded up lose one packet each,
/// least popular first, until the capacity holds. Without a popularity vector,
/// higher indices count as less popular.
pub fn quantize_placement(
    placement: &Placement,
    n: usize,
    popularity: Option<&PopularityDist>,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("fragments per file must be at least 1"));
    }
    if let Some(p) = popularity {
        if p.num_files() != placement.num_files() {
            return Err(Error::DimensionMismatch {
                expected: placement.num_files(),
                got: p.num_files(),
            });
        }
    }
    let nf = n as f64;
    let mut m: Vec<usize> = placement
        .q()
        .iter()
        .map(|&x| ((x * nf + 0.5).floor() as usize).min(n))
        .collect();
    // 1e-9 absorbs products such as 0.3 * 10 = 2.9999999999999996
    let capacity = (placement.cache_size() * nf + 1e-9).floor() as usize;
    let mut total: usize = m.iter().sum();
    if total > capacity {
        let mut order: Vec<usize> = (0..m.len())
            .filter(|&j| m[j] as f64 > placement.q()[j] * nf)
            .collect();
        match popularity {
            Some(p) => order.sort_by(|&a, &b| {
                p.probs()[a]
                    .total_cmp(&p.probs()[b])
                    .then_with(|| b.cmp(&a))
            }),
            None => order.reverse(),
        }
        for j in order {
            if total <= capacity {
                break;
            }
            m[j] -= 1;
            total -= 1;
        }
    }
    Ok(m)
}
