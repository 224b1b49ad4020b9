//! Coverage of the square SBS grid.
//!
//! SBSs sit on a square lattice of pitch `d_s` with coverage radius `r` in
//! `[d_s / sqrt(2), d_s]`. In that range every point of a grid cell is covered
//! by at least one and at most four of the cell's corner stations, so the
//! coverage profile can be read off a single unit cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::CoverageProfile;

/// Samples drawn per independently seeded chunk of the Monte Carlo estimate.
const CHUNK: u64 = 1 << 16;

/// Corner stations of a unit cell, hence the maximum coverage count.
pub const UNIT_CELL_CORNERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkGeometry {
    pub mbs_radius: f64,
    pub sbs_spacing: f64,
    pub sbs_radius: f64,
    pub user_density: f64,
}

impl NetworkGeometry {
    pub fn new(
        mbs_radius: f64,
        sbs_spacing: f64,
        sbs_radius: f64,
        user_density: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("mbs radius", mbs_radius),
            ("sbs spacing", sbs_spacing),
            ("user density", user_density),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let (lo, hi) = Self::radius_bounds(sbs_spacing);
        // relative slack so that r = d_s / sqrt(2) written out in decimal is accepted
        let eps = 1e-9 * sbs_spacing;
        if !(sbs_radius >= lo - eps && sbs_radius <= hi + eps) {
            return Err(Error::invalid(format!(
                "sbs radius {sbs_radius} outside [{lo}, {hi}] for spacing {sbs_spacing}"
            )));
        }
        Ok(Self {
            mbs_radius,
            sbs_spacing,
            sbs_radius,
            user_density,
        })
    }

    /// Valid SBS radius range `[d_s / sqrt(2), d_s]`.
    pub fn radius_bounds(sbs_spacing: f64) -> (f64, f64) {
        (sbs_spacing / std::f64::consts::SQRT_2, sbs_spacing)
    }

    pub fn with_sbs_radius(&self, sbs_radius: f64) -> Result<Self> {
        Self::new(
            self.mbs_radius,
            self.sbs_spacing,
            sbs_radius,
            self.user_density,
        )
    }

    pub fn cell_area(&self) -> f64 {
        self.sbs_spacing * self.sbs_spacing
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageAreas {
    /// `areas[d - 1]`: square meters of the unit cell covered by exactly `d` SBSs.
    pub areas: Vec<f64>,
    pub cell_area: f64,
    /// Raw per-bucket sample counts behind `areas`.
    pub hits: Vec<u64>,
    pub samples: u64,
}

/// Monte Carlo estimate of the unit-cell coverage areas.
///
/// Samples are split into fixed chunks, each drawn from ChaCha8 seeded with
/// `seed` on stream `chunk_index`, so the result depends only on
/// `(geom, samples, seed)` and not on how many threads run.
pub fn coverage_areas_unit_cell(
    geom: &NetworkGeometry,
    samples: u64,
    seed: u64,
) -> Result<CoverageAreas> {
    if samples < 10_000 {
        return Err(Error::invalid(format!(
            "need at least 10^4 samples, got {samples}"
        )));
    }
    let side = geom.sbs_spacing;
    // the half-diagonal point is covered by all four corners when r = d_s / sqrt(2)
    let r2 = (geom.sbs_radius * geom.sbs_radius).max(side * side / 2.0);
    let corners = [(0.0, 0.0), (side, 0.0), (0.0, side), (side, side)];
    let chunks = samples.div_ceil(CHUNK);

    let hits = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut local = [0u64; UNIT_CELL_CORNERS];
            for _ in 0..count {
                let x = side * rng.random::<f64>();
                let y = side * rng.random::<f64>();
                let covered = corners
                    .iter()
                    .filter(|(cx, cy)| (x - cx).powi(2) + (y - cy).powi(2) <= r2)
                    .count();
                debug_assert!(covered >= 1);
                local[covered.max(1) - 1] += 1;
            }
            local
        })
        .reduce(
            || [0u64; UNIT_CELL_CORNERS],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let cell_area = geom.cell_area();
    Ok(CoverageAreas {
        areas: hits
            .iter()
            .map(|&h| cell_area * h as f64 / samples as f64)
            .collect(),
        cell_area,
        hits: hits.to_vec(),
        samples,
    })
}

/// Normalizes coverage areas into the profile `gamma_d = A_d / sum_i A_i`.
pub fn coverage_profile(areas: &CoverageAreas) -> Result<CoverageProfile> {
    if areas.areas.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::invalid("coverage areas must be non-negative"));
    }
    let total: f64 = areas.areas.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("coverage areas are all zero"));
    }
    CoverageProfile::new(areas.areas.iter().map(|a| a / total).collect())
}

/// Coverage profile straight from the geometry.
pub fn estimate_coverage(
    geom: &NetworkGeometry,
    samples: u64,
    seed: u64,
) -> Result<CoverageProfile> {
    coverage_profile(&coverage_areas_unit_cell(geom, samples, seed)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeploymentCounts {
    pub num_sbs: usize,
    pub num_users: u64,
}

/// Number of SBSs deployed and users served inside the MBS disk.
///
/// Users: `round(rho * pi * D^2)`. SBSs: lattice points `(i*d_s, j*d_s)` whose
/// coverage disk reaches into the MBS disk, i.e. at distance `<= D + r`.
pub fn deployment_counts(geom: &NetworkGeometry) -> DeploymentCounts {
    let reach = geom.mbs_radius + geom.sbs_radius;
    let reach2 = reach * reach * (1.0 + 1e-12);
    let k = (reach / geom.sbs_spacing).floor() as i64;
    let mut num_sbs = 0;
    for i in -k..=k {
        for j in -k..=k {
            let x = i as f64 * geom.sbs_spacing;
            let y = j as f64 * geom.sbs_spacing;
            if x * x + y * y <= reach2 {
                num_sbs += 1;
            }
        }
    }
    let num_users = (geom.user_density * std::f64::consts::PI * geom.mbs_radius * geom.mbs_radius)
        .round() as u64;
    DeploymentCounts { num_sbs, num_users }
}
