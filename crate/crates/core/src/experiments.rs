//! Experiment runners behind the CLI subcommands.
//!
//! Each runner returns typed rows (used directly by tests) and a CSV [`Table`]
//! with a fixed header. Numeric cells use six-decimal fixed notation.

use std::io::Write;
use std::str::FromStr;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::game::{
    equilibrium_placement, no_adversary_placement, sweep_alpha, threshold_sweep, worst_case_rate,
    EquilibriumResult, SolverStatus, ThresholdBracket, Thresholds, DEFAULT_DISTANCE_TOL,
    DEFAULT_TOL,
};
use crate::geometry::{
    coverage_areas_unit_cell, coverage_profile, deployment_counts, estimate_coverage,
    NetworkGeometry,
};
use crate::model::{quantize_placement, GameConfig, Placement};
use crate::rate::equilibrium_objective;
use crate::simulator::{simulate, SimReport};

pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_REQUESTS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Gamma,
    Placement,
    SweepAlpha,
    SweepR,
    SweepCache,
    Thresholds,
    Simulate,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gamma" => Self::Gamma,
            "placement" => Self::Placement,
            "sweep-alpha" => Self::SweepAlpha,
            "sweep-r" => Self::SweepR,
            "sweep-cache" => Self::SweepCache,
            "thresholds" => Self::Thresholds,
            "simulate" => Self::Simulate,
            other => return Err(Error::Config(format!("unknown experiment '{other}'"))),
        })
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::Config(format!("grid '{s}': {what}"));
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("'{t}' is not a number")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(bad("need start <= stop and step > 0"));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            (0..count)
                .map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad("expected start:stop:step or a comma list")),
    };
    if grid.is_empty() {
        return Err(bad("empty grid"));
    }
    Ok(grid)
}

/// The default `alpha` grid `0:1:0.01`.
pub fn default_alpha_grid() -> Vec<f64> {
    parse_grid("0:1:0.01").expect("static grid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub config: Config,
    pub alpha_grid: Vec<f64>,
    /// SBS radii in meters.
    pub r_grid: Vec<f64>,
    /// Cache sizes in files.
    pub cache_grid: Vec<f64>,
    /// Monte Carlo samples for each coverage profile.
    pub samples: u64,
    /// Requests per simulated row.
    pub requests: u64,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, config: Config) -> Self {
        Self {
            kind,
            config,
            alpha_grid: default_alpha_grid(),
            r_grid: vec![45.0, 50.0, 55.0, 60.0],
            cache_grid: vec![10.0, 20.0, 40.0],
            samples: DEFAULT_SAMPLES,
            requests: DEFAULT_REQUESTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.geometry()?;
        c.library()?;
        // grids are only checked for the experiments that read them
        use ExperimentKind::*;
        if !matches!(self.kind, Gamma | Placement) {
            check_grid("alpha", &self.alpha_grid, |a| (0.0..=1.0).contains(&a))?;
        }
        if self.kind == SweepR {
            let (lo, hi) = NetworkGeometry::radius_bounds(c.sbs_spacing_m);
            let eps = 1e-9 * c.sbs_spacing_m;
            check_grid("r", &self.r_grid, |r| r >= lo - eps && r <= hi + eps)?;
        }
        if self.kind == SweepCache {
            let n = c.num_files as f64;
            check_grid("cache", &self.cache_grid, |m| m > 0.0 && m < n)?;
        }
        if !(0.0..=1.0).contains(&c.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", c.alpha)));
        }
        if !(c.cache_size > 0.0) {
            return Err(Error::Config("cache_size must be positive".into()));
        }
        if self.samples < 10_000 {
            return Err(Error::Config("samples must be at least 10^4".into()));
        }
        if self.requests == 0 {
            return Err(Error::Config("requests must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_grid(name: &str, grid: &[f64], valid: impl Fn(f64) -> bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config(format!("{name} grid is not sorted")));
    }
    if let Some(v) = grid.iter().find(|&&v| !valid(v)) {
        return Err(Error::Config(format!("{name} grid value {v} out of range")));
    }
    Ok(())
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Six-decimal fixed notation without a negative zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: Table,
    /// Human-readable `key = value` lines.
    pub summary: Vec<String>,
    /// Set when any row's solve did not reach optimality.
    pub solver_failed: bool,
}

pub fn run(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::Gamma => run_gamma(spec),
        ExperimentKind::Placement => run_placement(spec),
        ExperimentKind::SweepAlpha => run_sweep_alpha(spec),
        ExperimentKind::SweepR => run_sweep_r(spec),
        ExperimentKind::SweepCache => run_sweep_cache(spec),
        ExperimentKind::Thresholds => run_thresholds(spec),
        ExperimentKind::Simulate => run_simulate(spec),
    }
}

pub fn run_gamma(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let geom = spec.config.geometry()?;
    let areas = coverage_areas_unit_cell(&geom, spec.samples, spec.config.seed)?;
    let gamma = coverage_profile(&areas)?;
    let mut table = Table::new(["d", "area_m2", "gamma", "hits"]);
    for (i, (&a, &g)) in areas.areas.iter().zip(gamma.gamma()).enumerate() {
        table.rows.push(vec![
            (i + 1).to_string(),
            fmt6(a),
            fmt6(g),
            areas.hits[i].to_string(),
        ]);
    }
    let counts = deployment_counts(&geom);
    Ok(ExperimentOutput {
        table,
        summary: vec![
            format!("samples = {}", areas.samples),
            format!("num_sbs = {}", counts.num_sbs),
            format!("num_users = {}", counts.num_users),
        ],
        solver_failed: false,
    })
}

/// Header of the equilibrium CSV schema for `num_files` files.
pub fn equilibrium_header(num_files: usize) -> Vec<String> {
    let mut h: Vec<String> = ["alpha", "R_total", "R_legit", "R_adv", "j_star"]
        .into_iter()
        .map(String::from)
        .collect();
    h.extend((1..=num_files).map(|j| format!("q_{j}")));
    h
}

/// One equilibrium CSV row; `j_star` is written one-based.
pub fn equilibrium_row(r: &EquilibriumResult) -> Vec<String> {
    let mut row = vec![
        fmt6(r.alpha),
        fmt6(r.rates.r_total),
        fmt6(r.rates.r_legit),
        fmt6(r.rates.r_adv),
        (r.j_star + 1).to_string(),
    ];
    row.extend(r.q_star.q().iter().map(|&x| fmt6(x)));
    row
}

pub fn run_placement(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let cfg = spec.config.game(spec.samples)?;
    let result = equilibrium_placement(&cfg, DEFAULT_TOL)?;
    let mut table = Table::new(equilibrium_header(cfg.num_files()));
    table.rows.push(equilibrium_row(&result));
    Ok(ExperimentOutput {
        table,
        summary: vec![format!("status = {}", result.status.as_str())],
        solver_failed: result.status != SolverStatus::Optimal,
    })
}

/// One row of an alpha sweep with the two reference placements evaluated at
/// the same alpha.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub equilibrium: EquilibriumResult,
    /// Rate of the `alpha = 0` optimum under this alpha.
    pub r_no_adversary_placement: f64,
    /// Rate of the uniform placement under this alpha.
    pub r_uniform_placement: f64,
}

pub fn alpha_sweep_rows(cfg: &GameConfig, alphas: &[f64]) -> Result<Vec<SweepRow>> {
    let reference = no_adversary_placement(cfg)?;
    let uniform = Placement::uniform(cfg.num_files(), cfg.cache_size)?;
    sweep_alpha(cfg, alphas, DEFAULT_TOL)?
        .into_iter()
        .map(|eq| {
            let at = |q: &Placement| {
                equilibrium_objective(eq.alpha, q, &cfg.popularity, &cfg.coverage)
                    .map(|r| r.r_total)
            };
            Ok(SweepRow {
                r_no_adversary_placement: at(&reference)?,
                r_uniform_placement: at(&uniform)?,
                equilibrium: eq,
            })
        })
        .collect()
}

fn sweep_cells(row: &SweepRow) -> Vec<String> {
    let eq = &row.equilibrium;
    vec![
        fmt6(eq.alpha),
        fmt6(eq.rates.r_total),
        fmt6(eq.rates.r_legit),
        fmt6(eq.rates.r_adv),
        fmt6(row.r_no_adversary_placement),
        fmt6(row.r_uniform_placement),
        (eq.j_star + 1).to_string(),
        eq.status.as_str().to_string(),
    ]
}

const SWEEP_COLUMNS: [&str; 8] = [
    "alpha",
    "R_total",
    "R_legit",
    "R_adv",
    "R_no_adversary_placement",
    "R_uniform_placement",
    "j_star",
    "status",
];

pub fn run_sweep_alpha(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let cfg = spec.config.game(spec.samples)?;
    let rows = alpha_sweep_rows(&cfg, &spec.alpha_grid)?;
    let mut table = Table::new(SWEEP_COLUMNS);
    table.rows = rows.iter().map(sweep_cells).collect();
    Ok(ExperimentOutput {
        solver_failed: any_failed(rows.iter().map(|r| &r.equilibrium)),
        summary: vec![format!("worst_case_rate = {}", fmt6(worst_case_rate(&cfg)))],
        table,
    })
}

fn any_failed<'a>(mut it: impl Iterator<Item = &'a EquilibriumResult>) -> bool {
    it.any(|r| r.status != SolverStatus::Optimal)
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Equilibrium rate at `alpha` for each SBS radius, with the coverage
/// profile re-estimated per radius.
pub fn rate_vs_radius(
    config: &Config,
    radii: &[f64],
    alpha: f64,
    samples: u64,
) -> Result<Vec<(f64, f64)>> {
    let base = config.game(samples)?;
    let geom = config.geometry()?;
    radii
        .iter()
        .map(|&r| {
            let gamma = estimate_coverage(&geom.with_sbs_radius(r)?, samples, config.seed)?;
            let cfg = base.with_coverage(gamma).with_alpha(alpha)?;
            Ok((r, equilibrium_placement(&cfg, DEFAULT_TOL)?.rates.r_total))
        })
        .collect()
}

pub fn run_sweep_r(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let base = spec.config.game(spec.samples)?;
    let geom = spec.config.geometry()?;
    let mut header = vec!["r_m"];
    header.extend(SWEEP_COLUMNS);
    let mut table = Table::new(header);
    let mut failed = false;
    let mut at_zero = Vec::new();
    for &r in &spec.r_grid {
        let gamma = estimate_coverage(&geom.with_sbs_radius(r)?, spec.samples, spec.config.seed)?;
        let cfg = base.with_coverage(gamma);
        let rows = alpha_sweep_rows(&cfg, &spec.alpha_grid)?;
        failed |= any_failed(rows.iter().map(|r| &r.equilibrium));
        at_zero.push((
            r,
            equilibrium_placement(&cfg.with_alpha(0.0)?, DEFAULT_TOL)?
                .rates
                .r_total,
        ));
        for row in &rows {
            let mut cells = vec![fmt6(r)];
            cells.extend(sweep_cells(row));
            table.rows.push(cells);
        }
    }
    let slope = least_squares_slope(&at_zero)
        .map(fmt6)
        .unwrap_or_else(|| "n/a".into());
    Ok(ExperimentOutput {
        table,
        summary: vec![format!("slope_R0_per_m = {slope}")],
        solver_failed: failed,
    })
}

fn fmt_threshold(t: Option<ThresholdBracket>) -> String {
    match t {
        Some(b) => format!("{} (bracket {}..{})", fmt6(b.at), fmt6(b.below), fmt6(b.at)),
        None => "none".into(),
    }
}

fn threshold_summary(t: &Thresholds) -> Vec<String> {
    vec![
        format!("alpha_thr_1 = {}", fmt_threshold(t.branching)),
        format!("alpha_thr_2 = {}", fmt_threshold(t.gathering)),
    ]
}

pub fn run_sweep_cache(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let base = spec.config.game(spec.samples)?;
    let mut header = vec!["cache_size"];
    header.extend(SWEEP_COLUMNS);
    let mut table = Table::new(header);
    let mut summary = Vec::new();
    let mut failed = false;
    for &m in &spec.cache_grid {
        let cfg = base.with_cache_size(m)?;
        let rows = alpha_sweep_rows(&cfg, &spec.alpha_grid)?;
        failed |= any_failed(rows.iter().map(|r| &r.equilibrium));
        for row in &rows {
            let mut cells = vec![fmt6(m)];
            cells.extend(sweep_cells(row));
            table.rows.push(cells);
        }
        let reference = no_adversary_placement(&cfg)?;
        let uniform = Placement::uniform(cfg.num_files(), m)?;
        let eqs: Vec<EquilibriumResult> = rows.into_iter().map(|r| r.equilibrium).collect();
        let t = crate::game::detect_thresholds(&reference, &uniform, &eqs, DEFAULT_DISTANCE_TOL)?;
        summary.extend(
            threshold_summary(&t)
                .into_iter()
                .map(|s| format!("M={} {s}", fmt6(m))),
        );
    }
    Ok(ExperimentOutput {
        table,
        summary,
        solver_failed: failed,
    })
}

/// Tracked entries of one placement: min, max, and the last non-zero entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedEntries {
    pub q_min: f64,
    pub q_max: f64,
    /// One-based index of the last file with a non-zero share.
    pub mu: Option<usize>,
    pub q_mu: f64,
}

pub fn tracked_entries(q: &Placement) -> TrackedEntries {
    let mu = q.q().iter().rposition(|&x| x > 1e-9);
    TrackedEntries {
        q_min: q.min(),
        q_max: q.max(),
        mu: mu.map(|j| j + 1),
        q_mu: mu.map_or(0.0, |j| q.q()[j]),
    }
}

pub fn run_thresholds(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let cfg = spec.config.game(spec.samples)?;
    let sweep = threshold_sweep(&cfg, &spec.alpha_grid, DEFAULT_DISTANCE_TOL)?;
    let mut table = Table::new(["alpha", "q_min", "q_max", "q_mu", "mu", "R_total", "status"]);
    for r in &sweep.results {
        let t = tracked_entries(&r.q_star);
        table.rows.push(vec![
            fmt6(r.alpha),
            fmt6(t.q_min),
            fmt6(t.q_max),
            fmt6(t.q_mu),
            t.mu.map_or_else(|| "0".into(), |m| m.to_string()),
            fmt6(r.rates.r_total),
            r.status.as_str().to_string(),
        ]);
    }
    Ok(ExperimentOutput {
        table,
        summary: threshold_summary(&sweep.thresholds),
        solver_failed: any_failed(sweep.results.iter()),
    })
}

/// Simulated versus analytic rate for one equilibrium placement.
#[derive(Debug, Clone)]
pub struct SimulationRow {
    pub alpha: f64,
    pub report: SimReport,
    /// Analytic rate on the quantized placement `m / n`.
    pub analytic_quantized: f64,
    /// Analytic rate on the continuous placement `q`.
    pub analytic_continuous: f64,
    pub status: SolverStatus,
}

impl SimulationRow {
    pub fn z_score(&self) -> f64 {
        let diff = self.report.backhaul_fraction_mean - self.analytic_quantized;
        if self.report.backhaul_fraction_stderr > 0.0 {
            diff / self.report.backhaul_fraction_stderr
        } else if diff.abs() < 1e-12 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

/// Simulates the equilibrium placement for `cfg` with `n` fragments per file.
pub fn simulation_row(
    cfg: &GameConfig,
    n: usize,
    requests: u64,
    seed: u64,
) -> Result<SimulationRow> {
    let eq = equilibrium_placement(cfg, DEFAULT_TOL)?;
    let m = quantize_placement(&eq.q_star, n, Some(&cfg.popularity))?;
    let quantized = Placement::from_packets(&m, n, cfg.cache_size)?;
    let analytic_quantized =
        equilibrium_objective(cfg.alpha, &quantized, &cfg.popularity, &cfg.coverage)?.r_total;
    let report = simulate(&eq.q_star, cfg, n, requests, seed)?;
    Ok(SimulationRow {
        alpha: cfg.alpha,
        report,
        analytic_quantized,
        analytic_continuous: eq.rates.r_total,
        status: eq.status,
    })
}

pub fn run_simulate(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let cfg = spec.config.game(spec.samples)?;
    let s = cfg.coverage.max_coverage();
    let mut header: Vec<String> = ["requests", "mean", "stderr"].map(String::from).to_vec();
    header.extend((1..=s).map(|d| format!("count_d{d}")));
    header.extend(
        [
            "alpha",
            "analytic_rate",
            "analytic_rate_continuous",
            "z_score",
        ]
        .map(String::from),
    );
    let mut table = Table::new(header);
    let mut failed = false;
    for (i, &alpha) in spec.alpha_grid.iter().enumerate() {
        let row = simulation_row(
            &cfg.with_alpha(alpha)?,
            spec.config.fragments_per_file,
            spec.requests,
            spec.config.seed.wrapping_add(i as u64),
        )?;
        failed |= row.status != SolverStatus::Optimal;
        let mut cells = vec![
            row.report.requests.to_string(),
            fmt6(row.report.backhaul_fraction_mean),
            fmt6(row.report.backhaul_fraction_stderr),
        ];
        cells.extend(row.report.per_coverage_counts.iter().map(u64::to_string));
        cells.extend([
            fmt6(alpha),
            fmt6(row.analytic_quantized),
            fmt6(row.analytic_continuous),
            fmt6(row.z_score()),
        ]);
        table.rows.push(cells);
    }
    Ok(ExperimentOutput {
        table,
        summary: Vec::new(),
        solver_failed: failed,
    })
}
