//! Dense two-phase simplex with Bland's rule.
//!
//! Variables carry finite lower bounds (default 0) and no upper bounds; rows are
//! `≤`, `≥` or `=` constraints. Small problems only: the tableau is stored densely.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Pivot and optimality tolerance.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
    pub label: String,
}

impl LpRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `minimize objective·x` subject to the rows and `x >= lower_bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    variables: Vec<String>,
    objective: Vec<f64>,
    lower_bounds: Vec<f64>,
    rows: Vec<LpRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(variables: Vec<String>, objective: Vec<f64>) -> Result<Self> {
        if variables.len() != objective.len() {
            return Err(Error::Dimension(format!(
                "{} variable names for {} objective coefficients",
                variables.len(),
                objective.len()
            )));
        }
        if objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("objective coefficients must be finite".into()));
        }
        let n = variables.len();
        Ok(Self { variables, objective, lower_bounds: vec![0.0; n], rows: Vec::new() })
    }

    pub fn set_lower_bound(&mut self, j: usize, bound: f64) -> Result<()> {
        if j >= self.variables.len() || !bound.is_finite() {
            return Err(Error::InvalidArgument(format!("bad lower bound {bound} for variable {j}")));
        }
        self.lower_bounds[j] = bound;
        Ok(())
    }

    pub fn add_row(
        &mut self,
        coefficients: Vec<f64>,
        relation: Relation,
        rhs: f64,
        label: impl Into<String>,
    ) -> Result<()> {
        if coefficients.len() != self.variables.len() {
            return Err(Error::Dimension(format!(
                "row with {} coefficients for {} variables",
                coefficients.len(),
                self.variables.len()
            )));
        }
        if coefficients.iter().any(|v| !v.is_finite()) || !rhs.is_finite() {
            return Err(Error::InvalidArgument("row entries must be finite".into()));
        }
        self.rows.push(LpRow { coefficients, relation, rhs, label: label.into() });
        Ok(())
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower_bounds
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = self.lower_bounds.iter().zip(x).map(|(lb, v)| (lb - v).max(0.0)).fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).solve(self)
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let term = |coeffs: &[f64]| {
            let parts: Vec<String> = coeffs
                .iter()
                .zip(&self.variables)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, v)| format!("{c:+} {v}"))
                .collect();
            if parts.is_empty() {
                "0".to_string()
            } else {
                parts.join(" ")
            }
        };
        writeln!(f, "minimize {}", term(&self.objective))?;
        writeln!(f, "subject to")?;
        for row in &self.rows {
            writeln!(f, "  {}: {} {} {}", row.label, term(&row.coefficients), row.relation, row.rhs)?;
        }
        writeln!(f, "bounds")?;
        for (v, lb) in self.variables.iter().zip(&self.lower_bounds) {
            writeln!(f, "  {v} >= {lb}")?;
        }
        Ok(())
    }
}

struct Tableau {
    /// `m` rows of `cols + 1` entries; the last entry is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_structural: usize,
    first_artificial: usize,
    cols: usize,
    objective_shift: f64,
    rhs_scale: f64,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.variables.len();
        let m = lp.rows.len();
        // Shift x = lb + y and normalize every right-hand side to be nonnegative.
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|r| {
                let rhs = r.rhs - r.activity(&lp.lower_bounds);
                if rhs < 0.0 {
                    let flipped = match r.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (r.coefficients.iter().map(|a| -a).collect(), flipped, -rhs)
                } else {
                    (r.coefficients.clone(), r.relation, rhs)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + n_slack;
        let cols = first_artificial + n_art;
        let mut t = vec![vec![0.0; cols + 1]; m];
        let mut basis = vec![0; m];
        let (mut next_slack, mut next_art) = (n, first_artificial);
        for (i, (coeffs, rel, rhs)) in rows.drain(..).enumerate() {
            t[i][..n].copy_from_slice(&coeffs);
            t[i][cols] = rhs;
            match rel {
                Relation::Le => {
                    t[i][next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    t[i][next_slack] = -1.0;
                    next_slack += 1;
                    t[i][next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    t[i][next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        let rhs_scale = t.iter().map(|r| r[cols].abs()).fold(1.0, f64::max);
        Self {
            t,
            basis,
            n_structural: n,
            first_artificial,
            cols,
            objective_shift: lp.objective_value(&lp.lower_bounds),
            rhs_scale,
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.cols + 1];
        z[..cost.len()].copy_from_slice(cost);
        for (i, row) in self.t.iter().enumerate() {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (zj, a) in z.iter_mut().zip(row) {
                    *zj -= cb * a;
                }
            }
        }
        z
    }

    fn pivot(&mut self, z: &mut [f64], r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                    row[c] = 0.0;
                }
            }
        }
        let f = z[c];
        if f != 0.0 {
            for (v, pv) in z.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            z[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn run(&mut self, z: &mut [f64], allowed: usize, iterations: &mut usize, cap: usize) -> Result<Phase> {
        loop {
            // Bland: lowest-index improving column, then lowest-index basic variable among ratio ties.
            let Some(enter) = (0..allowed).find(|&j| z[j] < -SIMPLEX_TOL) else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[enter];
                if a > SIMPLEX_TOL {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            let tie = (ratio - best).abs() <= SIMPLEX_TOL * best.abs().max(1.0);
                            if (tie && self.basis[i] < self.basis[k]) || (!tie && ratio < best) {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Phase::Unbounded);
            };
            *iterations += 1;
            if *iterations > cap {
                return Err(Error::SolverFailure(format!("simplex exceeded {cap} iterations")));
            }
            self.pivot(z, r, enter);
        }
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let cap = 10 * (self.t.len() + self.cols).max(1);
        let mut iterations = 0;
        let infeasible =
            |iterations| LpSolution { status: LpStatus::Infeasible, x: Vec::new(), objective: f64::NAN, iterations };

        if self.first_artificial < self.cols {
            let mut cost = vec![0.0; self.cols];
            cost[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            let mut z = self.reduced_costs(&cost);
            self.run(&mut z, self.cols, &mut iterations, cap)?;
            let infeasibility = -z[self.cols];
            if infeasibility > SIMPLEX_TOL * self.rhs_scale {
                return Ok(infeasible(iterations));
            }
            // Pivot zero-level artificials out of the basis; drop rows that are redundant.
            let mut i = 0;
            while i < self.t.len() {
                if self.basis[i] >= self.first_artificial {
                    let col = (0..self.first_artificial).find(|&j| self.t[i][j].abs() > SIMPLEX_TOL);
                    match col {
                        Some(j) => self.pivot(&mut z, i, j),
                        None => {
                            self.t.remove(i);
                            self.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }

        let mut z = self.reduced_costs(&lp.objective);
        match self.run(&mut z, self.first_artificial, &mut iterations, cap)? {
            Phase::Unbounded => {
                return Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    x: Vec::new(),
                    objective: f64::NEG_INFINITY,
                    iterations,
                });
            }
            Phase::Optimal => {}
        }
        let mut x = lp.lower_bounds.clone();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_structural {
                x[b] += self.t[i][self.cols];
            }
        }
        let objective = lp.objective_value(&x);
        debug_assert!((objective - (self.objective_shift - z[self.cols])).abs() <= 1e-6 * objective.abs().max(1.0));
        Ok(LpSolution { status: LpStatus::Optimal, x, objective, iterations })
    }
}
