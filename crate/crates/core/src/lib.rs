//! Adversary-robust coded cache placement for heterogeneous cellular networks.
//!
//! A macro-cell base station (MBS) fills the caches of a grid of small-cell
//! base stations (SBSs) with MDS-coded packets. Legitimate users request files
//! according to a Zipf popularity law; a fraction `alpha` of malicious users
//! requests whatever file maximizes the backhaul load. This crate
//!
//! - evaluates the legitimate, adversarial and total average backhaul rates
//!   of a placement ([`rate`]),
//! - solves the MBS-vs-adversaries Stackelberg game for the equilibrium
//!   placement ([`game`]), backed by a small simplex solver ([`lp`]),
//! - derives coverage profiles for the square SBS grid ([`geometry`]),
//! - cross-checks the analytic rates with a request-level Monte Carlo
//!   simulator that does explicit packet accounting ([`simulator`]),
//! - and runs the parameter sweeps behind the CLI ([`experiments`]).

pub mod config;
pub mod error;
pub mod experiments;
pub mod game;
pub mod geometry;
pub mod lp;
pub mod model;
pub mod rate;
pub mod simulator;

pub use error::{Error, Result};
pub use game::{
    best_response, detect_thresholds, equilibrium_placement, no_adversary_placement,
    worst_case_rate, EquilibriumResult, SolverStatus, Thresholds,
};
pub use geometry::{
    coverage_areas_unit_cell, coverage_profile, deployment_counts, estimate_coverage,
    CoverageAreas, NetworkGeometry,
};
pub use model::{
    quantize_placement, zipf_popularity, CoverageProfile, GameConfig, LibraryConfig, Placement,
    PopularityDist, RateBreakdown,
};
pub use rate::{adversary_rate, legit_rate, total_rate, AdversaryStrategy};
pub use simulator::{packet_accounting_check, simulate, CodedPlacement, SimReport};
