//! Dense bounded-variable primal simplex.
//!
//! Solves `min c'x` subject to linear `<=`, `>=`, `=` rows and per-variable
//! bounds `l <= x <= u` (finite `l`, possibly infinite `u`). Upper bounds are
//! handled implicitly: a nonbasic variable sits at either bound and the ratio
//! test allows bound flips, so boxed variables never add rows.
//!
//! Phase one minimizes the sum of artificials on the rows whose slack cannot
//! start basic; phase two minimizes the real objective. Entering columns follow
//! Dantzig's rule, switching to Bland's rule after a streak of degenerate
//! pivots so the method terminates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Constraint {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Hard cap on simplex iterations (pivots plus bound flips) per phase.
    pub max_iterations: usize,
    /// A reduced cost must beat this to let a column enter.
    pub optimality_tol: f64,
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot_tol: f64,
    /// Phase-one residual above which the program is declared infeasible.
    pub feasibility_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            optimality_tol: 1e-12,
            pivot_tol: 1e-9,
            feasibility_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, v: Var) -> f64 {
        self.x[v.0]
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Adds a variable with objective coefficient `cost` and bounds
    /// `lower <= x <= upper`; `upper` may be `f64::INFINITY`.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> Var {
        assert!(lower.is_finite(), "lower bounds must be finite");
        assert!(upper >= lower, "empty variable domain [{lower}, {upper}]");
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        Var(self.cost.len() - 1)
    }

    pub fn add_constraint(&mut self, coeffs: &[(Var, f64)], relation: Relation, rhs: f64) {
        let coeffs = coeffs
            .iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(v, c)| {
                assert!(v.0 < self.cost.len(), "unknown variable {:?}", v);
                (v.0, *c)
            })
            .collect();
        self.rows.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max);
        self.rows
            .iter()
            .map(|row| {
                let lhs: f64 = row.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
                match row.relation {
                    Relation::Le => (lhs - row.rhs).max(0.0),
                    Relation::Ge => (row.rhs - lhs).max(0.0),
                    Relation::Eq => (lhs - row.rhs).abs(),
                }
            })
            .fold(bounds, f64::max)
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with(SolveOptions::default())
    }

    pub fn solve_with(&self, opts: SolveOptions) -> Result<LpSolution> {
        let mut tableau = Tableau::build(self);
        let mut iterations = 0;
        let mut status = LpStatus::Optimal;

        if tableau.num_artificial > 0 {
            let phase_one: Vec<f64> = (0..tableau.ncols)
                .map(|j| if tableau.is_artificial(j) { 1.0 } else { 0.0 })
                .collect();
            tableau.set_cost(phase_one);
            let (it, st) = tableau.run(&opts)?;
            iterations += it;
            if st == LpStatus::IterationLimit {
                return Ok(self.extract(&tableau, LpStatus::IterationLimit, iterations));
            }
            let residual: f64 = (0..tableau.m)
                .filter(|&i| tableau.is_artificial(tableau.basis[i]))
                .map(|i| tableau.beta[i])
                .sum();
            let scale = 1.0 + tableau.beta.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            if residual > opts.feasibility_tol * scale {
                return Err(Error::Infeasible);
            }
            tableau.drive_out_artificials(&opts);
        }

        let mut phase_two = vec![0.0; tableau.ncols];
        phase_two[..self.cost.len()].copy_from_slice(&self.cost);
        tableau.set_cost(phase_two);
        let (it, st) = tableau.run(&opts)?;
        iterations += it;
        if st == LpStatus::IterationLimit {
            status = LpStatus::IterationLimit;
        }
        Ok(self.extract(&tableau, status, iterations))
    }

    fn extract(&self, t: &Tableau, status: LpStatus, iterations: usize) -> LpSolution {
        let x: Vec<f64> = (0..self.cost.len())
            .map(|j| {
                let v = self.lower[j] + t.value(j);
                v.clamp(self.lower[j], self.upper[j])
            })
            .collect();
        LpSolution {
            objective: self.objective_at(&x),
            x,
            status,
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    ncols: usize,
    first_artificial: usize,
    num_artificial: usize,
    /// Row-major `B^-1 A`.
    a: Vec<f64>,
    /// Values of the basic variables, shifted so every lower bound is zero.
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    blocked: Vec<bool>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.cost.len();
        let m = lp.rows.len();

        // Shift x = l + x' and orient rows so every right-hand side is non-negative.
        let mut oriented = Vec::with_capacity(m);
        for row in &lp.rows {
            let shift: f64 = row.coeffs.iter().map(|&(j, c)| c * lp.lower[j]).sum();
            let rhs = row.rhs - shift;
            let flip = match row.relation {
                Relation::Le => rhs < 0.0,
                Relation::Ge => rhs <= 0.0,
                Relation::Eq => rhs < 0.0,
            };
            let sign = if flip { -1.0 } else { 1.0 };
            let relation = match (row.relation, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            oriented.push((sign, relation, sign * rhs));
        }

        let num_slack = oriented
            .iter()
            .filter(|(_, r, _)| *r != Relation::Eq)
            .count();
        let num_artificial = oriented
            .iter()
            .filter(|(_, r, _)| *r != Relation::Le)
            .count();
        let first_artificial = n + num_slack;
        let ncols = first_artificial + num_artificial;

        let mut a = vec![0.0; m * ncols];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut state = vec![ColState::AtLower; ncols];
        let mut upper = vec![f64::INFINITY; ncols];
        for j in 0..n {
            upper[j] = lp.upper[j] - lp.lower[j];
        }

        let mut next_slack = n;
        let mut next_art = first_artificial;
        for (i, (row, &(sign, relation, rhs))) in lp.rows.iter().zip(&oriented).enumerate() {
            let base = i * ncols;
            for &(j, c) in &row.coeffs {
                a[base + j] += sign * c;
            }
            beta[i] = rhs;
            match relation {
                Relation::Le => {
                    a[base + next_slack] = 1.0;
                    basis[i] = next_slack;
                    state[next_slack] = ColState::Basic;
                    next_slack += 1;
                }
                Relation::Ge => {
                    a[base + next_slack] = -1.0;
                    next_slack += 1;
                    a[base + next_art] = 1.0;
                    basis[i] = next_art;
                    state[next_art] = ColState::Basic;
                    next_art += 1;
                }
                Relation::Eq => {
                    a[base + next_art] = 1.0;
                    basis[i] = next_art;
                    state[next_art] = ColState::Basic;
                    next_art += 1;
                }
            }
        }

        Self {
            m,
            ncols,
            first_artificial,
            num_artificial,
            a,
            beta,
            basis,
            state,
            upper,
            cost: vec![0.0; ncols],
            reduced: vec![0.0; ncols],
            blocked: vec![false; ncols],
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            ColState::Basic => {
                let row = self.basis.iter().position(|&b| b == j).unwrap();
                self.beta[row]
            }
            ColState::AtLower => 0.0,
            ColState::AtUpper => self.upper[j],
        }
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.reduced.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
            for (d, &aij) in self.reduced.iter_mut().zip(row) {
                *d -= cb * aij;
            }
        }
    }

    fn choose_entering(&self, tol: f64, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            if self.blocked[j] {
                continue;
            }
            let score = match self.state[j] {
                ColState::Basic => continue,
                ColState::AtLower => -self.reduced[j],
                ColState::AtUpper => self.reduced[j],
            };
            if score <= tol {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn run(&mut self, opts: &SolveOptions) -> Result<(usize, LpStatus)> {
        let mut degenerate_streak = 0usize;
        for iter in 0..opts.max_iterations {
            let bland = degenerate_streak > 50;
            let Some(e) = self.choose_entering(opts.optimality_tol, bland) else {
                return Ok((iter, LpStatus::Optimal));
            };
            let dir = if self.state[e] == ColState::AtLower {
                1.0
            } else {
                -1.0
            };

            // Ratio test: (limit, leaving row, leaves at upper bound)
            let mut theta = self.upper[e];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_pivot = 0.0_f64;
            for i in 0..self.m {
                let alpha = dir * self.a[i * self.ncols + e];
                let b = self.basis[i];
                let (limit, to_upper) = if alpha > opts.pivot_tol {
                    (self.beta[i].max(0.0) / alpha, false)
                } else if alpha < -opts.pivot_tol && self.upper[b].is_finite() {
                    ((self.upper[b] - self.beta[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < theta,
                    Some((r, _)) => {
                        limit < theta - 1e-12
                            || (limit <= theta + 1e-12
                                && if bland {
                                    b < self.basis[r]
                                } else {
                                    alpha.abs() > leave_pivot
                                })
                    }
                };
                if better {
                    theta = limit.min(theta);
                    leave = Some((i, to_upper));
                    leave_pivot = alpha.abs();
                }
            }
            if theta.is_infinite() {
                return Err(Error::Unbounded);
            }
            if theta <= 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }

            for i in 0..self.m {
                let aie = self.a[i * self.ncols + e];
                if aie != 0.0 {
                    self.beta[i] -= dir * aie * theta;
                }
            }

            match leave {
                None => {
                    self.state[e] = if dir > 0.0 {
                        ColState::AtUpper
                    } else {
                        ColState::AtLower
                    };
                }
                Some((r, to_upper)) => {
                    let entering_value = if dir > 0.0 {
                        theta
                    } else {
                        self.upper[e] - theta
                    };
                    let leaving = self.basis[r];
                    self.state[leaving] = if to_upper {
                        ColState::AtUpper
                    } else {
                        ColState::AtLower
                    };
                    self.beta[r] = entering_value;
                    self.pivot(r, e);
                }
            }
        }
        Ok((opts.max_iterations, LpStatus::IterationLimit))
    }

    /// Makes column `e` basic in row `r`; basic values are left to the caller.
    fn pivot(&mut self, r: usize, e: usize) {
        let nc = self.ncols;
        let piv = self.a[r * nc + e];
        let mut pivot_row: Vec<f64> = self.a[r * nc..(r + 1) * nc].to_vec();
        for v in pivot_row.iter_mut() {
            *v /= piv;
        }
        pivot_row[e] = 1.0;
        let nonzero: Vec<usize> = (0..nc).filter(|&k| pivot_row[k] != 0.0).collect();

        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * nc + e];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * nc..(i + 1) * nc];
            for &k in &nonzero {
                row[k] -= f * pivot_row[k];
            }
            row[e] = 0.0;
        }
        let f = self.reduced[e];
        if f != 0.0 {
            for &k in &nonzero {
                self.reduced[k] -= f * pivot_row[k];
            }
            self.reduced[e] = 0.0;
        }
        self.a[r * nc..(r + 1) * nc].copy_from_slice(&pivot_row);

        self.state[e] = ColState::Basic;
        self.basis[r] = e;
    }

    /// After a feasible phase one, swaps zero-valued artificials out of the
    /// basis where possible and blocks every artificial from re-entering.
    fn drive_out_artificials(&mut self, opts: &SolveOptions) {
        for r in 0..self.m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let candidate = (0..self.first_artificial).find(|&j| {
                self.state[j] != ColState::Basic
                    && self.a[r * self.ncols + j].abs() > opts.pivot_tol
            });
            if let Some(j) = candidate {
                let value = match self.state[j] {
                    ColState::AtUpper => self.upper[j],
                    _ => 0.0,
                };
                let leaving = self.basis[r];
                self.state[leaving] = ColState::AtLower;
                self.beta[r] = value;
                self.pivot(r, j);
            }
        }
        for j in self.first_artificial..self.ncols {
            self.blocked[j] = true;
            self.upper[j] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-3.0, 0.0, f64::INFINITY);
        let y = lp.add_var(-5.0, 0.0, f64::INFINITY);
        lp.add_constraint(&[(x, 1.0)], Relation::Le, 4.0);
        lp.add_constraint(&[(y, 2.0)], Relation::Le, 12.0);
        lp.add_constraint(&[(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.value(x), 2.0) && close(s.value(y), 6.0));
        assert!(close(s.objective, -36.0));
    }

    #[test]
    fn needs_phase_one() {
        // min x + y s.t. x + 2y >= 4, 3x + y >= 6, x - y = 0 -> x = y = 1.5
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_constraint(&[(x, 1.0), (y, 2.0)], Relation::Ge, 4.0);
        lp.add_constraint(&[(x, 3.0), (y, 1.0)], Relation::Ge, 6.0);
        lp.add_constraint(&[(x, 1.0), (y, -1.0)], Relation::Eq, 0.0);
        let s = lp.solve().unwrap();
        assert!(
            close(s.value(x), 1.5) && close(s.value(y), 1.5),
            "{:?}",
            s.x
        );
    }

    #[test]
    fn bound_flips_and_shifted_lower_bounds() {
        // min -x - y with x in [1, 2], y in [-1, 3], x + y <= 4
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 1.0, 2.0);
        let y = lp.add_var(-2.0, -1.0, 3.0);
        lp.add_constraint(&[(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        let s = lp.solve().unwrap();
        assert!(
            close(s.value(x), 1.0) && close(s.value(y), 3.0),
            "{:?}",
            s.x
        );
        assert!(lp.max_violation(&s.x) < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_constraint(&[(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(lp.solve().unwrap_err(), Error::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_constraint(&[(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap_err(), Error::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 10.0);
        let y = lp.add_var(2.0, 0.0, 10.0);
        lp.add_constraint(&[(x, 1.0), (y, 1.0)], Relation::Eq, 3.0);
        lp.add_constraint(&[(x, 2.0), (y, 2.0)], Relation::Eq, 6.0);
        let s = lp.solve().unwrap();
        assert!(
            close(s.value(x), 3.0) && close(s.value(y), 0.0),
            "{:?}",
            s.x
        );
    }

    #[test]
    fn iteration_limit_is_reported() {
        let mut lp = LinearProgram::new();
        let vars: Vec<Var> = (0..5).map(|_| lp.add_var(-1.0, 0.0, 1.0)).collect();
        let all: Vec<(Var, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(&all, Relation::Le, 2.5);
        let s = lp
            .solve_with(SolveOptions {
                max_iterations: 1,
                ..SolveOptions::default()
            })
            .unwrap();
        assert_eq!(s.status, LpStatus::IterationLimit);
    }
}
