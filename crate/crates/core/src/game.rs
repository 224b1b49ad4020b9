//! Stackelberg game between the MBS (leader) and the adversaries (follower).
//!
//! For any placement the adversaries' best response is to request the least
//! cached file, which turns the adversarial rate into a function of `min(q)`.
//! The leader then minimizes
//!
//! ```text
//! (1 - alpha) * sum_j p_j * f(q_j) + alpha * f(min(q)),   f(x) = sum_d gamma_d * max(1 - d*x, 0)
//! ```
//!
//! over `0 <= q_j <= 1, sum_j q_j <= M`. `f` is convex piecewise linear with
//! breakpoints at `1/S, ..., 1/2, 1`, so the problem is an LP. Two exact LP
//! formulations are available; see [`Formulation`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation, SolveOptions, Var};
use crate::model::{GameConfig, Placement, RateBreakdown};
use crate::rate::{equilibrium_objective, AdversaryStrategy};

/// Default objective accuracy of an equilibrium solve.
pub const DEFAULT_TOL: f64 = 1e-7;

/// Default infinity-norm distance used to tell placements apart.
pub const DEFAULT_DISTANCE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    IterationLimit,
    Infeasible,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::IterationLimit => "iteration-limit",
            SolverStatus::Infeasible => "infeasible",
        }
    }
}

/// How the piecewise-linear objective is written as an LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// Each `q_j` (and `min(q)`) is split into `S` bounded segment variables,
    /// one per linear piece of `f`. `N + 1` rows.
    #[default]
    Segment,
    /// Epigraph variables `t_{d,j} >= 1 - d*q_j`, `s_d >= 1 - d*mu` and
    /// `mu <= q_j`. About `N*S + N + S + 1` rows; meant for small instances.
    Epigraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub alpha: f64,
    pub q_star: Placement,
    /// Zero-based index of the file the adversaries request.
    pub j_star: usize,
    pub rates: RateBreakdown,
    pub status: SolverStatus,
}

/// Adversaries' best response: the lowest-indexed least-cached file, as a
/// point-mass request distribution.
pub fn best_response(q: &Placement) -> (usize, AdversaryStrategy) {
    let values = q.q();
    let mut j_star = 0;
    for (j, &x) in values.iter().enumerate() {
        if x < values[j_star] {
            j_star = j;
        }
    }
    let strategy = AdversaryStrategy::point_mass(j_star, values.len())
        .expect("best response index is in range");
    (j_star, strategy)
}

/// Closed-form rate when every user is an adversary: the uniform placement
/// `M/N` is optimal and yields `sum_d gamma_d * max(1 - d*M/N, 0)`.
pub fn worst_case_rate(cfg: &GameConfig) -> f64 {
    let share = (cfg.cache_size / cfg.num_files() as f64).min(1.0);
    cfg.coverage.deficit(share)
}

pub fn equilibrium_placement(cfg: &GameConfig, tol: f64) -> Result<EquilibriumResult> {
    equilibrium_placement_with(cfg, tol, Formulation::Segment)
}

/// Solves the leader's problem and returns the canonical equilibrium.
///
/// Among optimal placements the one returned is: any capacity the LP left
/// unused water-filled into the least-cached files, then rearranged to be
/// non-increasing along decreasing popularity (ties keep index order).
/// Neither step can raise the objective.
pub fn equilibrium_placement_with(
    cfg: &GameConfig,
    tol: f64,
    formulation: Formulation,
) -> Result<EquilibriumResult> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let built = match formulation {
        Formulation::Segment => build_segment(cfg),
        Formulation::Epigraph => build_epigraph(cfg),
    };
    // Reduced costs below this bound can leave at most `tol` on the table
    // across every column's full range.
    let range = cfg.cache_size.max(1.0) * (built.lp.num_vars() + built.lp.num_constraints()) as f64;
    let opts = SolveOptions {
        optimality_tol: (tol / range).max(1e-15),
        ..SolveOptions::default()
    };
    let n = cfg.num_files();

    let (raw, status) = match built.lp.solve_with(opts) {
        Ok(sol) => {
            let q: Vec<f64> = (0..n)
                .map(|j| built.placement_value(&sol.x, j).clamp(0.0, 1.0))
                .collect();
            let status = match sol.status {
                LpStatus::Optimal => SolverStatus::Optimal,
                LpStatus::IterationLimit => SolverStatus::IterationLimit,
            };
            (q, status)
        }
        Err(Error::Infeasible) | Err(Error::Unbounded) => (vec![0.0; n], SolverStatus::Infeasible),
        Err(e) => return Err(e),
    };

    let q_star = canonicalize(cfg, raw)?;
    let (j_star, _) = best_response(&q_star);
    let rates = equilibrium_objective(cfg.alpha, &q_star, &cfg.popularity, &cfg.coverage)?;
    Ok(EquilibriumResult {
        alpha: cfg.alpha,
        q_star,
        j_star,
        rates,
        status,
    })
}

/// Equilibrium placement without adversaries (`alpha = 0`).
pub fn no_adversary_placement(cfg: &GameConfig) -> Result<Placement> {
    Ok(equilibrium_placement(&cfg.with_alpha(0.0)?, DEFAULT_TOL)?.q_star)
}

/// Equilibria for every `alpha` of the grid, in grid order.
pub fn sweep_alpha(cfg: &GameConfig, alphas: &[f64], tol: f64) -> Result<Vec<EquilibriumResult>> {
    alphas
        .par_iter()
        .map(|&a| equilibrium_placement(&cfg.with_alpha(a)?, tol))
        .collect()
}

struct BuiltProgram {
    lp: LinearProgram,
    /// Variables whose sum is `q_j`, per file.
    q_parts: Vec<Vec<Var>>,
}

impl BuiltProgram {
    fn placement_value(&self, x: &[f64], j: usize) -> f64 {
        self.q_parts[j].iter().map(|v| x[v.index()]).sum()
    }
}

/// Linear pieces of `f`, from `[0, 1/S]` up to `[1/2, 1]`, as
/// `(length, |slope|)` with `|slope| = sum_{d <= k} d * gamma_d` on `[1/(k+1), 1/k]`.
fn segments(cfg: &GameConfig) -> Vec<(f64, f64)> {
    let gamma = cfg.coverage.gamma();
    let s = gamma.len();
    (1..=s)
        .rev()
        .map(|k| {
            let hi = 1.0 / k as f64;
            let lo = if k == s { 0.0 } else { 1.0 / (k + 1) as f64 };
            let slope: f64 = gamma[..k]
                .iter()
                .enumerate()
                .map(|(i, g)| (i + 1) as f64 * g)
                .sum();
            (hi - lo, slope)
        })
        .collect()
}

fn build_segment(cfg: &GameConfig) -> BuiltProgram {
    let alpha = cfg.alpha;
    let segs = segments(cfg);
    let mut lp = LinearProgram::new();

    let q_parts: Vec<Vec<Var>> = cfg
        .popularity
        .probs()
        .iter()
        .map(|&pj| {
            segs.iter()
                .map(|&(len, slope)| lp.add_var(-(1.0 - alpha) * pj * slope, 0.0, len))
                .collect()
        })
        .collect();
    let min_parts: Vec<Var> = segs
        .iter()
        .map(|&(len, slope)| lp.add_var(-alpha * slope, 0.0, len))
        .collect();

    for parts in &q_parts {
        let mut row: Vec<(Var, f64)> = parts.iter().map(|&v| (v, 1.0)).collect();
        row.extend(min_parts.iter().map(|&v| (v, -1.0)));
        lp.add_constraint(&row, Relation::Ge, 0.0);
    }
    let capacity: Vec<(Var, f64)> = q_parts.iter().flatten().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(&capacity, Relation::Le, cfg.cache_size);

    BuiltProgram { lp, q_parts }
}

fn build_epigraph(cfg: &GameConfig) -> BuiltProgram {
    let alpha = cfg.alpha;
    let gamma = cfg.coverage.gamma();
    let mut lp = LinearProgram::new();

    let q: Vec<Var> = (0..cfg.num_files())
        .map(|_| lp.add_var(0.0, 0.0, 1.0))
        .collect();
    let mu = lp.add_var(0.0, 0.0, 1.0);
    for (&qj, &pj) in q.iter().zip(cfg.popularity.probs()) {
        for (i, &g) in gamma.iter().enumerate() {
            let t = lp.add_var((1.0 - alpha) * g * pj, 0.0, f64::INFINITY);
            lp.add_constraint(&[(t, 1.0), (qj, (i + 1) as f64)], Relation::Ge, 1.0);
        }
        lp.add_constraint(&[(mu, 1.0), (qj, -1.0)], Relation::Le, 0.0);
    }
    for (i, &g) in gamma.iter().enumerate() {
        let s = lp.add_var(alpha * g, 0.0, f64::INFINITY);
        lp.add_constraint(&[(s, 1.0), (mu, (i + 1) as f64)], Relation::Ge, 1.0);
    }
    let capacity: Vec<(Var, f64)> = q.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(&capacity, Relation::Le, cfg.cache_size);

    BuiltProgram {
        lp,
        q_parts: q.into_iter().map(|v| vec![v]).collect(),
    }
}

fn canonicalize(cfg: &GameConfig, mut q: Vec<f64>) -> Result<Placement> {
    let capacity = cfg.cache_size.min(q.len() as f64);
    let mut used: f64 = q.iter().sum();
    if used > capacity {
        // LP round-off only; scale back onto the capacity constraint
        let scale = capacity / used;
        q.iter_mut().for_each(|x| *x *= scale);
        used = capacity;
    }
    let leftover = capacity - used;
    if leftover > 1e-12 {
        water_fill(&mut q, leftover);
    }

    let mut sorted = q;
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut canonical = vec![0.0; sorted.len()];
    for (&file, &value) in cfg.popularity.rank_order().iter().zip(&sorted) {
        canonical[file] = value;
    }
    Placement::new(canonical, cfg.cache_size)
}

/// Raises the smallest entries to a common level, capped at one, until
/// `budget` extra capacity is spent.
fn water_fill(q: &mut [f64], budget: f64) {
    let spend = |level: f64| -> f64 { q.iter().map(|&x| (level.min(1.0) - x).max(0.0)).sum() };
    if spend(1.0) <= budget {
        q.iter_mut().for_each(|x| *x = 1.0);
        return;
    }
    let (mut lo, mut hi) = (q.iter().copied().fold(1.0, f64::min), 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spend(mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    q.iter_mut().for_each(|x| *x = x.max(lo));
}

/// A threshold located on the alpha grid: the first grid value showing the
/// change and the grid value just before it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdBracket {
    pub below: f64,
    pub at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// First alpha where the equilibrium leaves the no-adversary optimum.
    pub branching: Option<ThresholdBracket>,
    /// First alpha where the equilibrium reaches the uniform placement.
    pub gathering: Option<ThresholdBracket>,
}

/// Locates the two regime changes along a sweep sorted by alpha.
///
/// If the no-adversary optimum already coincides with the uniform placement
/// there is only one regime and both thresholds are absent.
pub fn detect_thresholds(
    reference: &Placement,
    uniform: &Placement,
    sweep: &[EquilibriumResult],
    distance_tol: f64,
) -> Result<Thresholds> {
    if !(distance_tol > 0.0) {
        return Err(Error::invalid("distance tolerance must be positive"));
    }
    if sweep.windows(2).any(|w| w[0].alpha > w[1].alpha) {
        return Err(Error::invalid("alpha grid must be sorted"));
    }
    let none = Thresholds {
        branching: None,
        gathering: None,
    };
    if reference.distance(uniform) <= distance_tol {
        return Ok(none);
    }
    let bracket = |i: usize| ThresholdBracket {
        below: sweep[i.saturating_sub(1)].alpha,
        at: sweep[i].alpha,
    };
    let branching = sweep
        .iter()
        .position(|r| r.q_star.distance(reference) > distance_tol)
        .map(bracket);
    let gathering = sweep
        .iter()
        .position(|r| r.q_star.distance(uniform) <= distance_tol)
        .map(bracket);
    Ok(Thresholds {
        branching,
        gathering,
    })
}

#[derive(Debug, Clone)]
pub struct ThresholdSweep {
    pub reference: Placement,
    pub uniform: Placement,
    pub results: Vec<EquilibriumResult>,
    pub thresholds: Thresholds,
}

/// Sweeps `alphas` and detects both thresholds against `q*(0)` and uniform.
pub fn threshold_sweep(
    cfg: &GameConfig,
    alphas: &[f64],
    distance_tol: f64,
) -> Result<ThresholdSweep> {
    let reference = no_adversary_placement(cfg)?;
    let uniform = Placement::uniform(cfg.num_files(), cfg.cache_size)?;
    let results = sweep_alpha(cfg, alphas, DEFAULT_TOL)?;
    let thresholds = detect_thresholds(&reference, &uniform, &results, distance_tol)?;
    Ok(ThresholdSweep {
        reference,
        uniform,
        results,
        thresholds,
    })
}
