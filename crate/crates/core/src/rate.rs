//! Closed-form average backhaul rates.
//!
//! A user covered by `d` SBSs receives `d * m_j` distinct coded packets of
//! file `j`; the MBS fills in the remaining `n - d * m_j`. Normalizing by `n`
//! and averaging over coverage and requests gives
//!
//! ```text
//! R = sum_d sum_j gamma_d * p_j * max(1 - d * q_j, 0)
//! ```
//!
//! for a request distribution `p`. Legitimate users plug in the popularity law,
//! adversaries plug in the distribution induced by their own requests.

use crate::error::{Error, Result};
use crate::model::{check_alpha, CoverageProfile, Placement, PopularityDist, RateBreakdown};

/// Request distribution of the adversarial users.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryStrategy {
    probs: Vec<f64>,
}

impl AdversaryStrategy {
    /// Every adversary requests `file`.
    pub fn point_mass(file: usize, num_files: usize) -> Result<Self> {
        if file >= num_files {
            return Err(Error::invalid(format!(
                "file index {file} out of range for {num_files} files"
            )));
        }
        let mut probs = vec![0.0; num_files];
        probs[file] = 1.0;
        Ok(Self { probs })
    }

    /// Empirical distribution of a request vector, one entry per adversary.
    pub fn from_requests(requests: &[usize], num_files: usize) -> Result<Self> {
        if requests.is_empty() {
            return Err(Error::invalid("at least one adversary request is needed"));
        }
        let mut probs = vec![0.0; num_files];
        for &j in requests {
            if j >= num_files {
                return Err(Error::invalid(format!(
                    "file index {j} out of range for {num_files} files"
                )));
            }
            probs[j] += 1.0;
        }
        let total = requests.len() as f64;
        probs.iter_mut().for_each(|x| *x /= total);
        Ok(Self { probs })
    }

    pub fn from_distribution(dist: &PopularityDist) -> Self {
        Self {
            probs: dist.probs().to_vec(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn weighted_rate(q: &Placement, weights: &[f64], gamma: &CoverageProfile) -> Result<f64> {
    if weights.len() != q.num_files() {
        return Err(Error::DimensionMismatch {
            expected: q.num_files(),
            got: weights.len(),
        });
    }
    Ok(q.q()
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w != 0.0)
        .map(|(&qj, &w)| w * gamma.deficit(qj))
        .sum())
}

/// Average backhaul rate of a legitimate user.
pub fn legit_rate(q: &Placement, p: &PopularityDist, gamma: &CoverageProfile) -> Result<f64> {
    weighted_rate(q, p.probs(), gamma)
}

/// Average backhaul rate of an adversarial user playing `strategy`.
pub fn adversary_rate(
    q: &Placement,
    gamma: &CoverageProfile,
    strategy: &AdversaryStrategy,
) -> Result<f64> {
    weighted_rate(q, strategy.probs(), gamma)
}

/// Adversarial rate when every adversary requests the least-cached file.
pub fn best_response_rate(q: &Placement, gamma: &CoverageProfile) -> f64 {
    gamma.deficit(q.min())
}

/// Mixes the two user classes: `alpha * r_adv + (1 - alpha) * r_legit`.
pub fn total_rate(alpha: f64, r_legit: f64, r_adv: f64) -> Result<RateBreakdown> {
    check_alpha(alpha)?;
    for (name, r) in [("legitimate", r_legit), ("adversarial", r_adv)] {
        if !(-1e-12..=1.0 + 1e-9).contains(&r) {
            return Err(Error::invalid(format!("{name} rate {r} outside [0, 1]")));
        }
    }
    Ok(RateBreakdown {
        r_legit,
        r_adv,
        r_total: alpha * r_adv + (1.0 - alpha) * r_legit,
    })
}

/// Leader objective: total rate with the adversaries playing their best response.
pub fn equilibrium_objective(
    alpha: f64,
    q: &Placement,
    p: &PopularityDist,
    gamma: &CoverageProfile,
) -> Result<RateBreakdown> {
    let r_legit = legit_rate(q, p, gamma)?;
    let r_adv = best_response_rate(q, gamma);
    total_rate(alpha, r_legit, r_adv)
}
