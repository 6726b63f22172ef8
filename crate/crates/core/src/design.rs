//! Optimal lottery design: choose `(R, c)` minimizing `R + α·c̄` such that the
//! induced equilibrium reaches `G*` and satisfies affine constraints on `(s, R)`.
//!
//! At `c̄ = G*` every player is active and `s_i = c_i + R·h_i'(G*)`, so the
//! bi-level problem collapses to a linear program over `(R, c)`. A brute-force
//! grid search over the true equilibrium serves as an independent oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{DesignPoint, LotteryInstance};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::par;

/// Default lower bound on the reward, standing in for `R > 0`.
pub const DEFAULT_R_MIN: f64 = 1e-3;
const CONSTRAINT_TOL: f64 = 1e-7;
const VERIFY_TOL: f64 = 1e-6;
const MAX_RECENTER: usize = 64;

/// One affine row `investment·s + reward·R <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineRow {
    pub investment: Vec<f64>,
    pub reward: f64,
    pub rhs: f64,
    pub label: String,
}

impl AffineRow {
    /// `investment·s + reward·R − rhs`; positive values are violations.
    pub fn residual(&self, s: &[f64], r: f64) -> f64 {
        self.investment.iter().zip(s).map(|(a, v)| a * v).sum::<f64>() + self.reward * r - self.rhs
    }

    fn scale(&self, s: &[f64], r: f64) -> f64 {
        let lhs = self.investment.iter().zip(s).map(|(a, v)| (a * v).abs()).sum::<f64>() + (self.reward * r).abs();
        lhs.max(self.rhs.abs()).max(1.0)
    }
}

/// Affine constraints `A·[s; R] <= b` with row labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintSet {
    players: usize,
    rows: Vec<AffineRow>,
}

impl ConstraintSet {
    pub fn new(players: usize) -> Self {
        Self { players, rows: Vec::new() }
    }

    pub fn push(&mut self, row: AffineRow) -> Result<()> {
        if row.investment.len() != self.players {
            return Err(Error::Dimension(format!(
                "row {:?} has {} investment coefficients for {} players",
                row.label,
                row.investment.len(),
                self.players
            )));
        }
        if row.investment.iter().any(|v| !v.is_finite()) || !row.reward.is_finite() || !row.rhs.is_finite() {
            return Err(Error::InvalidArgument(format!("row {:?} has non-finite entries", row.label)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn add(&mut self, investment: Vec<f64>, reward: f64, rhs: f64, label: impl Into<String>) -> Result<()> {
        self.push(AffineRow { investment, reward, rhs, label: label.into() })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn rows(&self) -> &[AffineRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Largest violation, each row scaled by the magnitude of its terms.
    pub fn max_violation(&self, s: &[f64], r: f64) -> f64 {
        self.rows.iter().map(|row| row.residual(s, r) / row.scale(s, r)).fold(0.0, f64::max)
    }

    /// Labels of rows that fail at `(s, R)`.
    pub fn violated(&self, s: &[f64], r: f64) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|row| row.residual(s, r) > CONSTRAINT_TOL * row.scale(s, r))
            .map(|row| row.label.as_str())
            .collect()
    }
}

/// How the individual-rationality requirement `U_i >= 0` becomes an affine row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrEncoding {
    /// `c_i <= h_i(G*)`, i.e. `s_i − R·h_i'(G*) <= h_i(G*)`.
    #[default]
    Simplified,
    /// `−(s_i − c_i + R·h_i(G*) − R·s_i) <= 0` as written in the source remark.
    /// After substituting `c_i = s_i − R·h_i'(G*)` and dividing by `R > 0`:
    /// `s_i <= h_i(G*) + h_i'(G*)`.
    Literal,
}

#[derive(Debug, Clone)]
pub struct DesignProblem {
    instance: LotteryInstance,
    constraints: ConstraintSet,
    alpha: f64,
    r_min: f64,
    individual_rationality: Option<IrEncoding>,
    g_star: f64,
    gradient: Vec<f64>,
}

impl DesignProblem {
    pub fn new(instance: LotteryInstance, constraints: ConstraintSet, alpha: f64) -> Result<Self> {
        crate::error::check_nonneg("alpha", alpha)?;
        if constraints.players() != instance.players() && !constraints.is_empty() {
            return Err(Error::Dimension(format!(
                "constraints over {} players for an instance with {}",
                constraints.players(),
                instance.players()
            )));
        }
        let g_star = instance.profile().socially_optimal_good()?;
        let gradient = instance.profile().functions().iter().map(|f| f.slope(g_star)).collect();
        let constraints = if constraints.is_empty() { ConstraintSet::new(instance.players()) } else { constraints };
        Ok(Self { instance, constraints, alpha, r_min: DEFAULT_R_MIN, individual_rationality: None, g_star, gradient })
    }

    pub fn with_r_min(mut self, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min.is_finite()) {
            return Err(Error::InvalidArgument(format!("R_min must be positive, got {r_min}")));
        }
        self.r_min = r_min;
        Ok(self)
    }

    pub fn with_individual_rationality(mut self, encoding: IrEncoding) -> Self {
        self.individual_rationality = Some(encoding);
        self
    }

    pub fn instance(&self) -> &LotteryInstance {
        &self.instance
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn g_star(&self) -> f64 {
        self.g_star
    }

    /// `∇h(G*) = (h_1'(G*), …, h_N'(G*))`.
    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    pub fn individual_rationality(&self) -> Option<IrEncoding> {
        self.individual_rationality
    }

    /// User constraints plus individual-rationality rows when enabled.
    pub fn all_constraints(&self) -> ConstraintSet {
        let mut all = self.constraints.clone();
        if let Some(enc) = self.individual_rationality {
            all.rows.extend(individual_rationality_rows(self, enc));
        }
        all
    }

    /// `s_i = c_i + R·h_i'(G*)`.
    pub fn predicted_investments(&self, d: &DesignPoint) -> Vec<f64> {
        d.perturbation().iter().zip(&self.gradient).map(|(c, g)| c + d.reward() * g).collect()
    }
}

/// One row per player enforcing nonnegative payoff at the reformulated equilibrium.
pub fn individual_rationality_rows(p: &DesignProblem, encoding: IrEncoding) -> Vec<AffineRow> {
    let n = p.instance.players();
    (0..n)
        .map(|i| {
            let f = p.instance.profile().get(i);
            let mut investment = vec![0.0; n];
            investment[i] = 1.0;
            let (reward, rhs) = match encoding {
                IrEncoding::Simplified => (-p.gradient[i], f.value(p.g_star)),
                IrEncoding::Literal => (0.0, f.value(p.g_star) + p.gradient[i]),
            };
            AffineRow { investment, reward, rhs, label: format!("ir_{}", i + 1) }
        })
        .collect()
}

/// The linear program over `(R, c_1, …, c_N)`.
#[derive(Debug, Clone)]
pub struct Reformulation {
    pub lp: LinearProgram,
    pub g_star: f64,
    pub alpha: f64,
    pub r_min: f64,
    pub gradient: Vec<f64>,
    /// Constraint rows in `(s, R)` space, one per LP row after the sum row.
    pub constraints: ConstraintSet,
}

impl Reformulation {
    /// Rows that came from `A·[s; R] <= b` (the sum row is excluded).
    pub fn constraint_row_count(&self) -> usize {
        self.constraints.len()
    }
}

pub fn build_reformulation(p: &DesignProblem) -> Result<Reformulation> {
    let n = p.instance.players();
    let mut names = vec!["R".to_string()];
    names.extend((1..=n).map(|i| format!("c{i}")));
    let mut objective = vec![0.0; n + 1];
    objective[0] = 1.0;
    let mut lp = LinearProgram::new(names, objective)?;
    lp.set_lower_bound(0, p.r_min)?;
    let mut sum_row = vec![1.0; n + 1];
    sum_row[0] = 0.0;
    lp.add_row(sum_row, Relation::Eq, p.g_star, "perturbation_sum")?;
    let constraints = p.all_constraints();
    for row in constraints.rows() {
        // a·(c + R∇h) + a_R·R <= b
        let mut coeffs = Vec::with_capacity(n + 1);
        coeffs.push(row.reward + row.investment.iter().zip(&p.gradient).map(|(a, g)| a * g).sum::<f64>());
        coeffs.extend_from_slice(&row.investment);
        lp.add_row(coeffs, Relation::Le, row.rhs, row.label.clone())?;
    }
    Ok(Reformulation {
        lp,
        g_star: p.g_star,
        alpha: p.alpha,
        r_min: p.r_min,
        gradient: p.gradient.clone(),
        constraints,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSolution {
    pub status: LpStatus,
    pub point: Option<DesignPoint>,
    /// `R* + α·G*`.
    pub objective: Option<f64>,
    pub g_star: f64,
    pub alpha: f64,
    pub predicted_investments: Vec<f64>,
    pub binding: Vec<String>,
}

impl DesignSolution {
    fn without_point(status: LpStatus, g_star: f64, alpha: f64) -> Self {
        Self {
            status,
            point: None,
            objective: None,
            g_star,
            alpha,
            predicted_investments: Vec::new(),
            binding: Vec::new(),
        }
    }

    /// Wraps a candidate `(R, c)` as an optimal solution of `p`, e.g. to verify a hand-picked design.
    pub fn from_point(p: &DesignProblem, point: DesignPoint) -> Self {
        let s = p.predicted_investments(&point);
        let all = p.all_constraints();
        let binding = binding_labels(&all, &s, point.reward(), p.r_min);
        Self {
            status: LpStatus::Optimal,
            objective: Some(point.reward() + p.alpha * p.g_star),
            g_star: p.g_star,
            alpha: p.alpha,
            predicted_investments: s,
            binding,
            point: Some(point),
        }
    }

    pub fn reward(&self) -> Option<f64> {
        self.point.as_ref().map(|d| d.reward())
    }

    pub fn total_investment(&self) -> f64 {
        self.predicted_investments.iter().sum()
    }
}

fn binding_labels(constraints: &ConstraintSet, s: &[f64], r: f64, r_min: f64) -> Vec<String> {
    let mut out: Vec<String> = constraints
        .rows()
        .iter()
        .filter(|row| row.residual(s, r).abs() <= CONSTRAINT_TOL * row.scale(s, r))
        .map(|row| row.label.clone())
        .collect();
    if r <= r_min * (1.0 + 1e-9) {
        out.push("reward_min".into());
    }
    out
}

/// Solves the reformulation, breaking ties toward the lexicographically smallest `c`.
pub fn solve_lp(reform: &Reformulation) -> Result<DesignSolution> {
    let first = reform.lp.solve()?;
    if first.status != LpStatus::Optimal {
        return Ok(DesignSolution::without_point(first.status, reform.g_star, reform.alpha));
    }
    let n = reform.gradient.len();
    let mut x = first.x;
    let mut lex = reform.lp.clone();
    let fix = |lp: &mut LinearProgram, j: usize, v: f64| -> Result<()> {
        let mut row = vec![0.0; n + 1];
        row[j] = 1.0;
        lp.add_row(row, Relation::Le, v, format!("fix_{j}"))
    };
    fix(&mut lex, 0, x[0])?;
    for j in 1..n {
        let mut objective = vec![0.0; n + 1];
        objective[j] = 1.0;
        let mut next = LinearProgram::new(lex.variables().to_vec(), objective)?;
        next.set_lower_bound(0, reform.r_min)?;
        for row in lex.rows() {
            next.add_row(row.coefficients.clone(), row.relation, row.rhs, row.label.clone())?;
        }
        let s = next.solve()?;
        if s.status != LpStatus::Optimal {
            break;
        }
        x = s.x;
        fix(&mut next, j, x[j])?;
        lex = next;
    }

    let reward = x[0].max(reform.r_min);
    let c: Vec<f64> = x[1..].iter().map(|v| v.max(0.0)).collect();
    let c_bar: f64 = c.iter().sum();
    if (c_bar - reform.g_star).abs() > 1e-8 * reform.g_star.max(1.0) {
        return Err(Error::InvariantViolation(format!("LP optimum has c̄ = {c_bar}, G* = {}", reform.g_star)));
    }
    let point = DesignPoint::new(reward, c)?;
    let s: Vec<f64> = point.perturbation().iter().zip(&reform.gradient).map(|(c, g)| c + reward * g).collect();
    let worst = reform.constraints.max_violation(&s, reward);
    if worst > CONSTRAINT_TOL {
        return Err(Error::InvariantViolation(format!("LP optimum violates a constraint by {worst:e} (scaled)")));
    }
    Ok(DesignSolution {
        status: LpStatus::Optimal,
        objective: Some(reward + reform.alpha * reform.g_star),
        g_star: reform.g_star,
        alpha: reform.alpha,
        binding: binding_labels(&reform.constraints, &s, reward, reform.r_min),
        predicted_investments: s,
        point: Some(point),
    })
}

/// `build_reformulation` followed by `solve_lp`.
pub fn solve_design(p: &DesignProblem) -> Result<DesignSolution> {
    solve_lp(&build_reformulation(p)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignVerification {
    pub public_good: f64,
    pub g_star: f64,
    pub max_prediction_error: f64,
    pub max_constraint_violation: f64,
    pub aggregate_payoff: f64,
    pub optimal_payoff: f64,
    pub all_active: bool,
}

/// Re-solves the equilibrium at the designed point and checks that it realizes the
/// predicted investments, `G = G*`, feasibility, and the socially optimal payoff.
pub fn verify_design(p: &DesignProblem, sol: &DesignSolution) -> Result<DesignVerification> {
    let point = match (&sol.status, &sol.point) {
        (LpStatus::Optimal, Some(d)) => d,
        _ => return Err(Error::InvalidArgument(format!("cannot verify a {:?} design", sol.status))),
    };
    let g_star = p.g_star;
    let scale = g_star.max(1.0);
    let all = p.all_constraints();
    let c_bar = point.perturbation_sum();
    if (c_bar - g_star).abs() > 1e-8 * scale {
        return Err(Error::ExactnessViolation(format!("design has c̄ = {c_bar} but G* = {g_star}")));
    }
    let predicted = p.predicted_investments(point);
    let violated = all.violated(&predicted, point.reward());
    if !violated.is_empty() {
        return Err(Error::ExactnessViolation(format!("design violates {}", violated.join(", "))));
    }

    let eq = p.instance.solve_equilibrium(point)?;
    let fail = |msg: String| Err(Error::ExactnessViolation(msg));
    if (eq.public_good - g_star).abs() > VERIFY_TOL * scale {
        return fail(format!("equilibrium good {} differs from G* = {g_star}", eq.public_good));
    }
    let max_prediction_error =
        eq.investments.iter().zip(&predicted).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max);
    if max_prediction_error > VERIFY_TOL {
        return fail(format!("equilibrium deviates from s = c + R∇h(G*) by {max_prediction_error:e}"));
    }
    if !eq.all_active() {
        return fail(format!("only players {:?} are active", eq.active_set));
    }
    let max_constraint_violation = all.max_violation(&eq.investments, point.reward());
    if max_constraint_violation > CONSTRAINT_TOL {
        return fail(format!("equilibrium violates constraints by {max_constraint_violation:e}"));
    }
    let aggregate_payoff =
        (0..p.instance.players()).map(|i| p.instance.payoff(point, &eq.investments, i)).sum::<Result<f64>>()?;
    let optimal_payoff = p.instance.profile().socially_optimal_payoff()?;
    if (aggregate_payoff - optimal_payoff).abs() > VERIFY_TOL * optimal_payoff.abs().max(1.0) {
        return fail(format!("aggregate payoff {aggregate_payoff} differs from optimum {optimal_payoff}"));
    }
    Ok(DesignVerification {
        public_good: eq.public_good,
        g_star,
        max_prediction_error,
        max_constraint_violation,
        aggregate_payoff,
        optimal_payoff,
        all_active: true,
    })
}

/// Grid for the brute-force oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceGrid {
    /// Upper end of the reward scan.
    pub r_max: f64,
    /// Coarse grid step as a fraction of `G*`: the coarse step is `G*/coarse_cells`.
    pub coarse_cells: usize,
    /// Coarse `c̄` slices scanned on each side of `G*`.
    pub slice_radius: usize,
    /// Refine by factors of 4 until the step is at most this value.
    pub resolution: f64,
    /// `|G − G*|` accepted as reaching the optimum; `None` means `1e−6·max(1, G*)`.
    pub good_tol: Option<f64>,
}

impl BruteForceGrid {
    pub fn new(r_max: f64, resolution: f64) -> Self {
        Self { r_max, coarse_cells: 10, slice_radius: 3, resolution, good_tol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub solution: DesignSolution,
    /// Final grid step.
    pub resolution: f64,
    pub evaluated: usize,
    /// Grid points with `G = G*` and all constraints met at the true equilibrium.
    pub feasible: usize,
    /// Feasible points found on slices with `c̄ ≠ G*`.
    pub feasible_off_slice: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    objective: f64,
    reward: f64,
}

struct ScanResult {
    best: Option<Candidate>,
    evaluated: usize,
    feasible: usize,
}

/// Reward scan for one `c`: ascending, stopping at the first feasible reward when
/// `stop_at_first` is set (the objective increases with `R` for fixed `c`).
fn scan_rewards(p: &DesignProblem, c: &[f64], rewards: &[f64], tol: f64, stop_at_first: bool) -> ScanResult {
    let mut out = ScanResult { best: None, evaluated: 0, feasible: 0 };
    let c_bar: f64 = c.iter().sum();
    let all = p.all_constraints();
    for &r in rewards {
        let Ok(d) = DesignPoint::new(r, c.to_vec()) else { continue };
        out.evaluated += 1;
        let Ok(eq) = p.instance.solve_equilibrium(&d) else { continue };
        if (eq.public_good - p.g_star).abs() > tol || all.max_violation(&eq.investments, r) > CONSTRAINT_TOL {
            continue;
        }
        out.feasible += 1;
        if out.best.is_none() {
            out.best = Some(Candidate { objective: r + p.alpha * c_bar, reward: r });
        }
        if stop_at_first {
            break;
        }
    }
    out
}

/// Nonnegative integer vectors of length `n` summing to `total`.
fn compositions(n: usize, total: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(n - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Offsets in `[-w, w]^(n-1)`, the last coordinate absorbing `shift − Σ others`.
fn window_offsets(n: usize, w: i64, shift: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n - 1 {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-w..=w).map(move |k| {
                    let mut v = v.clone();
                    v.push(k);
                    v
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|mut v| {
            let last = shift - v.iter().sum::<i64>();
            v.push(last);
            v
        })
        .filter(|v| v.last().is_some_and(|l| l.abs() <= w + shift.abs()))
        .collect()
}

fn reward_grid(lo: f64, hi: f64, step: f64, r_min: f64) -> Vec<f64> {
    let lo = lo.max(r_min);
    let mut out = vec![lo];
    let mut k = 1.0;
    loop {
        let r = lo + k * step;
        if r > hi + 1e-12 * hi.abs().max(1.0) {
            break;
        }
        out.push(r);
        k += 1.0;
    }
    out
}

fn better(a: &(Candidate, Vec<f64>), b: &(Candidate, Vec<f64>)) -> bool {
    match a.0.objective.total_cmp(&b.0.objective) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => {
            a.1.iter().zip(&b.1).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Less)
        }
    }
}

/// Grid search of the bi-level problem over `(R, c)` using the true equilibrium.
///
/// Exponential in the number of players; intended for `N <= 3`.
pub fn brute_force_bilevel(p: &DesignProblem, grid: &BruteForceGrid) -> Result<OracleSolution> {
    let n = p.instance.players();
    if n > 3 {
        return Err(Error::InvalidArgument(format!("brute-force oracle supports N <= 3, got {n}")));
    }
    if grid.coarse_cells == 0 || !(grid.resolution > 0.0) || !(grid.r_max > p.r_min) {
        return Err(Error::InvalidArgument("degenerate brute-force grid".into()));
    }
    let g_star = p.g_star;
    let tol = grid.good_tol.unwrap_or(1e-6 * g_star.max(1.0));
    let mut h = g_star / grid.coarse_cells as f64;
    let (mut evaluated, mut feasible, mut feasible_off_slice) = (0, 0, 0);

    // Coarse pass over every slice c̄ = G* + k·h.
    let mut jobs: Vec<(Vec<f64>, bool)> = Vec::new();
    let radius = grid.slice_radius as i64;
    for k in -radius..=radius {
        let total = grid.coarse_cells as i64 + k;
        if total < 0 {
            continue;
        }
        for comp in compositions(n, total as usize) {
            jobs.push((comp.iter().map(|&j| j as f64 * h).collect(), k == 0));
        }
    }
    let rewards = reward_grid(p.r_min, grid.r_max, h, p.r_min);
    let results = par::map(&jobs, |(c, on_slice)| scan_rewards(p, c, &rewards, tol, *on_slice));
    let mut best: Option<(Candidate, Vec<f64>)> = None;
    let mut absorb = |jobs: &[(Vec<f64>, bool)], results: Vec<ScanResult>, best: &mut Option<(Candidate, Vec<f64>)>| {
        for ((c, on_slice), r) in jobs.iter().zip(results) {
            evaluated += r.evaluated;
            feasible += r.feasible;
            if !on_slice {
                feasible_off_slice += r.feasible;
            }
            if let Some(cand) = r.best {
                let entry = (cand, c.clone());
                if best.as_ref().is_none_or(|b| better(&entry, b)) {
                    *best = Some(entry);
                }
            }
        }
    };
    absorb(&jobs, results, &mut best);

    // Zoom: refine around the incumbent on c̄ ∈ {G* − h, G*, G* + h}, re-centering
    // at each level until the incumbent stops moving.
    while h > grid.resolution {
        let coarse = h;
        h /= 4.0;
        for _ in 0..MAX_RECENTER {
            let Some((cand, center)) = best.clone() else { break };
            let w = 8;
            let mut jobs: Vec<(Vec<f64>, bool)> = Vec::new();
            for shift in -1..=1i64 {
                for off in window_offsets(n, w, shift) {
                    let c: Vec<f64> = center.iter().zip(&off).map(|(c, &o)| c + o as f64 * h).collect();
                    if c.iter().all(|v| *v >= -1e-12 * g_star.max(1.0)) {
                        jobs.push((c.iter().map(|v| v.max(0.0)).collect(), shift == 0));
                    }
                }
            }
            let rewards = reward_grid(cand.reward - 4.0 * coarse, cand.reward + 2.0 * coarse, h, p.r_min);
            let results = par::map(&jobs, |(c, on_slice)| scan_rewards(p, c, &rewards, tol, *on_slice));
            absorb(&jobs, results, &mut best);
            let moved = best.as_ref().is_some_and(|b| b.1 != center);
            if !moved {
                break;
            }
        }
    }

    let solution = match best {
        None => DesignSolution::without_point(LpStatus::Infeasible, g_star, p.alpha),
        Some((cand, c)) => {
            let point = DesignPoint::new(cand.reward, c)?;
            let mut sol = DesignSolution::from_point(p, point);
            sol.objective = Some(cand.objective);
            sol
        }
    };
    Ok(OracleSolution { solution, resolution: h, evaluated, feasible, feasible_off_slice })
}

/// Scans a single slice `c̄ = c_bar` and reports the closest the equilibrium gets to `G*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceScan {
    pub evaluated: usize,
    pub reaching_optimum: usize,
    pub min_good_gap: f64,
}

pub fn scan_perturbation_slice(
    p: &DesignProblem,
    c_bar: f64,
    cells: usize,
    rewards: &[f64],
    tol: f64,
) -> Result<SliceScan> {
    crate::error::check_nonneg("c̄", c_bar)?;
    let n = p.instance.players();
    let h = c_bar / cells.max(1) as f64;
    let jobs: Vec<Vec<f64>> =
        compositions(n, cells.max(1)).into_iter().map(|v| v.iter().map(|&j| j as f64 * h).collect()).collect();
    let gaps = par::map(&jobs, |c| {
        rewards
            .iter()
            .filter_map(|&r| {
                let d = DesignPoint::new(r, c.clone()).ok()?;
                let eq = p.instance.solve_equilibrium(&d).ok()?;
                Some((eq.public_good - p.g_star).abs())
            })
            .collect::<Vec<f64>>()
    });
    let all: Vec<f64> = gaps.into_iter().flatten().collect();
    Ok(SliceScan {
        evaluated: all.len(),
        reaching_optimum: all.iter().filter(|g| **g <= tol).count(),
        min_good_gap: all.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benefit::BenefitProfile;
    use approx::assert_abs_diff_eq;

    fn i2_problem(constraints: ConstraintSet) -> DesignProblem {
        let inst = LotteryInstance::new(BenefitProfile::scaled_log(&[1.0, 1.0]).unwrap());
        DesignProblem::new(inst, constraints, 1.0).unwrap()
    }

    fn s1_at_least_two() -> ConstraintSet {
        let mut cs = ConstraintSet::new(2);
        cs.add(vec![-1.0, 0.0], 0.0, -2.0, "s1_min").unwrap();
        cs
    }

    #[test]
    fn unconstrained_reformulation() {
        let p = i2_problem(ConstraintSet::new(2));
        let reform = build_reformulation(&p).unwrap();
        assert_eq!(reform.lp.rows().len(), 1);
        assert_eq!(reform.lp.lower_bounds()[0], DEFAULT_R_MIN);
        let sol = solve_lp(&reform).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let d = sol.point.as_ref().unwrap();
        assert_abs_diff_eq!(d.reward(), DEFAULT_R_MIN, epsilon = 1e-15);
        assert_abs_diff_eq!(d.perturbation_sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.objective.unwrap(), DEFAULT_R_MIN + 1.0, epsilon = 1e-12);
        // Lexicographic tie-break puts the perturbation on the last player.
        assert_eq!(d.perturbation(), &[0.0, 1.0]);
        assert!(sol.binding.contains(&"reward_min".to_string()));
    }

    #[test]
    fn reformulated_row_substitutes_gradient() {
        let reform = build_reformulation(&i2_problem(s1_at_least_two())).unwrap();
        let row = &reform.lp.rows()[1];
        assert_eq!(row.coefficients, vec![-0.5, -1.0, 0.0]);
        assert_eq!(row.rhs, -2.0);
        assert_eq!(row.relation, Relation::Le);
    }

    #[test]
    fn lower_bound_on_investment_forces_reward() {
        let p = i2_problem(s1_at_least_two());
        let sol = solve_design(&p).unwrap();
        let d = sol.point.as_ref().unwrap();
        assert_abs_diff_eq!(d.reward(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.perturbation()[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.perturbation()[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective.unwrap(), 3.0, epsilon = 1e-9);
        assert_eq!(sol.binding, vec!["s1_min".to_string()]);
        verify_design(&p, &sol).unwrap();
    }

    #[test]
    fn individual_rationality_rows_examples() {
        let p = i2_problem(ConstraintSet::new(2)).with_individual_rationality(IrEncoding::Simplified);
        let rows = individual_rationality_rows(&p, IrEncoding::Simplified);
        assert_eq!(rows.len(), 2);
        for (i, row) in rows.iter().enumerate() {
            assert_abs_diff_eq!(row.rhs, 2f64.ln(), epsilon = 1e-15);
            assert_eq!(row.reward, -0.5);
            assert_eq!(row.investment[i], 1.0);
        }
        let bad = DesignSolution::from_point(&p, DesignPoint::new(1.0, vec![1.0, 0.0]).unwrap());
        assert!(matches!(verify_design(&p, &bad), Err(Error::ExactnessViolation(_))));
        let good = DesignSolution::from_point(&p, DesignPoint::new(1.0, vec![0.5, 0.5]).unwrap());
        let v = verify_design(&p, &good).unwrap();
        assert_abs_diff_eq!(v.aggregate_payoff, 2.0 * (2f64.ln() - 0.5), epsilon = 1e-10);
        let payoff = p.instance().payoff(good.point.as_ref().unwrap(), &good.predicted_investments, 0).unwrap();
        assert_abs_diff_eq!(payoff, 2f64.ln() - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn literal_ir_encoding_row() {
        let p = i2_problem(ConstraintSet::new(2));
        let rows = individual_rationality_rows(&p, IrEncoding::Literal);
        assert_eq!(rows[0].reward, 0.0);
        assert_abs_diff_eq!(rows[0].rhs, 2f64.ln() + 0.5, epsilon = 1e-15);
    }

    #[test]
    fn verify_unconstrained_design() {
        let p = i2_problem(ConstraintSet::new(2)).with_r_min(0.1).unwrap();
        let sol = solve_design(&p).unwrap();
        let v = verify_design(&p, &sol).unwrap();
        assert_abs_diff_eq!(v.aggregate_payoff, 2.0 * 2f64.ln() - 1.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_design_is_reported() {
        let mut cs = ConstraintSet::new(2);
        cs.add(vec![1.0, 1.0], 0.0, 0.5, "cap").unwrap();
        let sol = solve_design(&i2_problem(cs)).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(sol.point.is_none());
    }

    #[test]
    fn oracle_matches_lp_on_lower_bound_example() {
        let p = i2_problem(s1_at_least_two());
        let grid = BruteForceGrid { r_max: 4.0, coarse_cells: 10, slice_radius: 2, resolution: 0.02, good_tol: None };
        let o = brute_force_bilevel(&p, &grid).unwrap();
        let d = o.solution.point.as_ref().unwrap();
        assert!(o.resolution <= 0.02);
        assert!((d.reward() - 2.0).abs() <= 2.0 * o.resolution, "{d:?}");
        assert!((d.perturbation()[0] - 1.0).abs() <= 2.0 * o.resolution);
        assert_eq!(o.feasible_off_slice, 0);
    }

    #[test]
    fn oracle_unconstrained_tracks_minimum_reward() {
        let p = i2_problem(ConstraintSet::new(2));
        let o = brute_force_bilevel(&p, &BruteForceGrid::new(2.0, 0.02)).unwrap();
        let obj = o.solution.objective.unwrap();
        assert!(obj >= DEFAULT_R_MIN + 1.0 - 1e-12 && obj <= DEFAULT_R_MIN + 1.0 + 2.0 * o.resolution);
        assert_abs_diff_eq!(o.solution.point.unwrap().perturbation_sum(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn off_optimum_slice_never_reaches_g_star() {
        let p = i2_problem(ConstraintSet::new(2));
        let rewards: Vec<f64> = (1..=50).map(|k| k as f64 * 0.1).collect();
        let scan = scan_perturbation_slice(&p, 0.6, 12, &rewards, 1e-3).unwrap();
        assert!(scan.evaluated > 0);
        assert_eq!(scan.reaching_optimum, 0);
        assert!(scan.min_good_gap > 1e-3);
    }

    #[test]
    fn compositions_and_windows() {
        assert_eq!(compositions(3, 2).len(), 6);
        let offs = window_offsets(2, 1, 0);
        assert!(offs.iter().all(|v| v.iter().sum::<i64>() == 0));
        assert_eq!(offs.len(), 3);
    }
}
