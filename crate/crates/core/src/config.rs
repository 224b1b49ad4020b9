//! Experiment configuration file.
//!
//! A flat TOML table with these keys, all optional:
//!
//! ```toml
//! num_files = 200
//! zipf_exponent = 0.7
//! cache_size = 20.0
//! alpha = 0.0
//! fragments_per_file = 100
//! mbs_radius_m = 500.0
//! sbs_spacing_m = 60.0
//! sbs_radius_m = 45.0
//! user_density_per_m2 = 0.05
//! seed = 1
//! ```
//!
//! Missing keys take the defaults above; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{estimate_coverage, NetworkGeometry};
use crate::model::{zipf_popularity, GameConfig, LibraryConfig};

/// Nominal file size carried into [`LibraryConfig`]; rates never depend on it.
pub const DEFAULT_FILE_SIZE_BITS: u64 = 8 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub num_files: usize,
    pub zipf_exponent: f64,
    pub cache_size: f64,
    pub alpha: f64,
    pub fragments_per_file: usize,
    pub mbs_radius_m: f64,
    pub sbs_spacing_m: f64,
    pub sbs_radius_m: f64,
    pub user_density_per_m2: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            num_files: 200,
            zipf_exponent: 0.7,
            cache_size: 20.0,
            alpha: 0.0,
            fragments_per_file: 100,
            mbs_radius_m: 500.0,
            sbs_spacing_m: 60.0,
            sbs_radius_m: 45.0,
            user_density_per_m2: 0.05,
            seed: 1,
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn geometry(&self) -> Result<NetworkGeometry> {
        NetworkGeometry::new(
            self.mbs_radius_m,
            self.sbs_spacing_m,
            self.sbs_radius_m,
            self.user_density_per_m2,
        )
    }

    pub fn library(&self) -> Result<LibraryConfig> {
        LibraryConfig::new(
            self.num_files,
            DEFAULT_FILE_SIZE_BITS,
            self.fragments_per_file,
        )
    }

    /// Builds the game, estimating the coverage profile with `samples` Monte
    /// Carlo points seeded from `seed`.
    pub fn game(&self, samples: u64) -> Result<GameConfig> {
        let gamma = estimate_coverage(&self.geometry()?, samples, self.seed)?;
        GameConfig::new(
            self.alpha,
            self.library()?,
            zipf_popularity(self.num_files, self.zipf_exponent)?,
            gamma,
            self.cache_size,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let c = Config::from_toml_str("alpha = 0.25\nseed = 9\n").unwrap();
        assert_eq!(c.alpha, 0.25);
        assert_eq!(c.seed, 9);
        assert_eq!(c.num_files, 200);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            Config::from_toml_str("num_file = 3"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config {
            cache_size: 12.5,
            ..Config::default()
        };
        assert_eq!(Config::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn invalid_geometry_surfaces_on_build() {
        let c = Config {
            sbs_radius_m: 30.0,
            ..Config::default()
        };
        assert!(c.game(10_000).is_err());
    }
}
