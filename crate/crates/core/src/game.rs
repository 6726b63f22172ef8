//! The perturbed fixed-prize lottery and its Nash equilibrium.
//!
//! Player `i` invests `s_i >= 0`. When total investment `s̄` reaches the reward
//! `R`, player `i` receives the share `(s_i − c_i)/(s̄ − c̄)` of `R` and the net
//! profit `G = s̄ − R` funds a public good worth `h_i(G)` to every player.
//! Otherwise the lottery is canceled and all payoffs are zero.

use serde::{Deserialize, Serialize};

use crate::benefit::BenefitProfile;
use crate::error::{Error, Result};
use crate::scalar;

/// Investments at or below this level count as inactive.
pub const TOL_ACTIVE: f64 = 1e-9;
/// An inactive player joins the active set once its marginal payoff at zero exceeds this.
const TOL_JOIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LotteryInstance {
    profile: BenefitProfile,
    wealth_caps: Option<Vec<f64>>,
}

impl LotteryInstance {
    pub fn new(profile: BenefitProfile) -> Self {
        Self { profile, wealth_caps: None }
    }

    pub fn with_wealth_caps(profile: BenefitProfile, caps: Vec<f64>) -> Result<Self> {
        if caps.len() != profile.len() {
            return Err(Error::Dimension(format!("{} wealth caps for {} players", caps.len(), profile.len())));
        }
        if let Some(w) = caps.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::InvalidArgument(format!("wealth cap must be positive, got {w}")));
        }
        Ok(Self { profile, wealth_caps: Some(caps) })
    }

    pub fn profile(&self) -> &BenefitProfile {
        &self.profile
    }

    pub fn wealth_caps(&self) -> Option<&[f64]> {
        self.wealth_caps.as_deref()
    }

    pub fn players(&self) -> usize {
        self.profile.len()
    }
}

/// A reward/perturbation pair `(R, c)` announced by the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignPointRepr")]
pub struct DesignPoint {
    reward: f64,
    perturbation: Vec<f64>,
    #[serde(skip)]
    perturbation_sum: f64,
}

#[derive(Deserialize)]
struct DesignPointRepr {
    reward: f64,
    perturbation: Vec<f64>,
}

impl TryFrom<DesignPointRepr> for DesignPoint {
    type Error = Error;
    fn try_from(r: DesignPointRepr) -> Result<Self> {
        DesignPoint::new(r.reward, r.perturbation)
    }
}

impl DesignPoint {
    pub fn new(reward: f64, perturbation: Vec<f64>) -> Result<Self> {
        if !(reward > 0.0 && reward.is_finite()) {
            return Err(Error::InvalidArgument(format!("reward must be positive, got {reward}")));
        }
        if let Some(c) = perturbation.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument(format!("perturbation parameters must be nonnegative, got {c}")));
        }
        let perturbation_sum = perturbation.iter().sum();
        Ok(Self { reward, perturbation, perturbation_sum })
    }

    /// `(R, 0)`: the classic, unperturbed lottery.
    pub fn unperturbed(reward: f64, players: usize) -> Result<Self> {
        Self::new(reward, vec![0.0; players])
    }

    pub fn reward(&self) -> f64 {
        self.reward
    }

    pub fn perturbation(&self) -> &[f64] {
        &self.perturbation
    }

    /// `c̄ = Σ c_i`.
    pub fn perturbation_sum(&self) -> f64 {
        self.perturbation_sum
    }

    fn check_players(&self, n: usize) -> Result<()> {
        if self.perturbation.len() != n {
            return Err(Error::Dimension(format!(
                "design point has {} perturbations for {} players",
                self.perturbation.len(),
                n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub investments: Vec<f64>,
    pub active_set: Vec<usize>,
    /// `G = Σ s_i − R`.
    pub public_good: f64,
    /// `S = Σ s_i − c̄`.
    pub pool: f64,
    pub max_foc_violation: f64,
    pub iterations: usize,
    /// Players whose equilibrium investment exceeds their wealth cap.
    pub cap_exceeded: Vec<usize>,
}

impl EquilibriumResult {
    pub fn total_investment(&self) -> f64 {
        self.investments.iter().sum()
    }

    pub fn all_active(&self) -> bool {
        self.active_set.len() == self.investments.len()
    }
}

/// `(dG/dR, dG/dc_i)` at an all-active equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sensitivities {
    pub d_good_d_reward: f64,
    pub d_good_d_perturbation: Vec<f64>,
}

fn check_investments(s: &[f64], n: usize) -> Result<()> {
    if s.len() != n {
        return Err(Error::Dimension(format!("{} investments for {} players", s.len(), n)));
    }
    for &v in s {
        crate::error::check_nonneg("investment", v)?;
    }
    Ok(())
}

impl LotteryInstance {
    /// Perturbed payoff `U_i(s, R, c)`.
    pub fn payoff(&self, d: &DesignPoint, s: &[f64], i: usize) -> Result<f64> {
        let n = self.players();
        d.check_players(n)?;
        check_investments(s, n)?;
        let total: f64 = s.iter().sum();
        self.payoff_unchecked(d, s[i], total, i)
    }

    fn payoff_unchecked(&self, d: &DesignPoint, s_i: f64, total: f64, i: usize) -> Result<f64> {
        let r = d.reward;
        if total < r {
            return Ok(0.0);
        }
        let pool = total - d.perturbation_sum;
        if pool == 0.0 {
            return Err(Error::SingularPool);
        }
        let share = (s_i - d.perturbation[i]) / pool;
        Ok(share * r + self.profile.get(i).value(total - r) - s_i)
    }

    /// `∂U_i/∂s_i = R (S − (s_i − c_i)) / S² + h_i'(s̄ − R) − 1` with `S = s̄ − c̄`.
    pub fn foc_residual(&self, d: &DesignPoint, s: &[f64], i: usize) -> Result<f64> {
        let n = self.players();
        d.check_players(n)?;
        check_investments(s, n)?;
        let total: f64 = s.iter().sum();
        if total < d.reward {
            return Err(Error::InvalidArgument(format!(
                "lottery canceled: total investment {total} below reward {}",
                d.reward
            )));
        }
        self.foc_unchecked(d, s[i], total, i)
    }

    fn foc_unchecked(&self, d: &DesignPoint, s_i: f64, total: f64, i: usize) -> Result<f64> {
        let pool = total - d.perturbation_sum;
        if !(pool > 0.0) {
            return Err(Error::SingularPool);
        }
        let r = d.reward;
        let g = (total - r).max(0.0);
        Ok(r * (pool - (s_i - d.perturbation[i])) / (pool * pool) + self.profile.get(i).slope(g) - 1.0)
    }

    /// Unique Nash equilibrium, starting the active-set search from all players.
    pub fn solve_equilibrium(&self, d: &DesignPoint) -> Result<EquilibriumResult> {
        let n = self.players();
        self.solve_equilibrium_from(d, &vec![true; n])
    }

    /// Nash equilibrium via the active-set method from an arbitrary initial active set.
    ///
    /// For a fixed active set `A` the aggregate first-order condition of the
    /// active players is a scalar equation in `G`; individual investments then
    /// follow from each active player's own condition. Players are dropped
    /// while some active investment is nonpositive and added while some
    /// inactive player would gain from investing.
    pub fn solve_equilibrium_from(&self, d: &DesignPoint, initial: &[bool]) -> Result<EquilibriumResult> {
        let n = self.players();
        d.check_players(n)?;
        if initial.len() != n {
            return Err(Error::Dimension(format!("initial active set of length {}", initial.len())));
        }
        let mut active = initial.to_vec();
        let max_changes = 2 * n;
        let mut changes = 0;
        let mut reset_used = active.iter().all(|&a| a);
        let mut solves = 0;

        loop {
            solves += 1;
            let solved = self.solve_for_active_set(d, &active);
            let (g, s) = match solved {
                Some(sol) => sol,
                None if !reset_used => {
                    active.iter_mut().for_each(|a| *a = true);
                    reset_used = true;
                    continue;
                }
                None => {
                    return Err(Error::InfeasibleRegime(format!(
                        "no root of the aggregate first-order condition with positive pool \
                         (R = {}, c̄ = {})",
                        d.reward, d.perturbation_sum
                    )))
                }
            };

            let worst_active = (0..n).filter(|&i| active[i] && s[i] <= 0.0).min_by(|&a, &b| s[a].total_cmp(&s[b]));
            let change = if let Some(i) = worst_active {
                Some((i, false))
            } else {
                let total = g + d.reward;
                let mut best: Option<(usize, f64)> = None;
                for i in (0..n).filter(|&i| !active[i]) {
                    let res = self.foc_unchecked(d, 0.0, total, i)?;
                    if res > TOL_JOIN && best.is_none_or(|(_, r)| res > r) {
                        best = Some((i, res));
                    }
                }
                best.map(|(i, _)| (i, true))
            };

            match change {
                Some((i, join)) => {
                    changes += 1;
                    if changes > max_changes {
                        return Err(Error::NonConvergence(changes));
                    }
                    active[i] = join;
                }
                None => return self.finish(d, g, s, solves),
            }
        }
    }

    /// Root of the aggregate active-player FOC in `G` and the implied investments.
    fn solve_for_active_set(&self, d: &DesignPoint, active: &[bool]) -> Option<(f64, Vec<f64>)> {
        let k = active.iter().filter(|&&a| a).count();
        if k == 0 {
            return None;
        }
        let r = d.reward;
        let c = &d.perturbation;
        let c_bar = d.perturbation_sum;
        let c_out: f64 = (0..c.len()).filter(|&i| !active[i]).map(|i| c[i]).sum();
        let kf = k as f64;
        let profile = &self.profile;
        let foc = |g: f64| {
            let pool = r + g - c_bar;
            let marg: f64 = (0..c.len()).filter(|&i| active[i]).map(|i| profile.get(i).slope(g)).sum();
            r * (kf - 1.0) / pool - r * c_out / (pool * pool) + marg - kf
        };

        // Domain: G >= 0 and S = R + G − c̄ > 0.
        let scale = r.max(c_bar).max(1.0);
        let floor = (c_bar - r).max(0.0);
        let g_lo = if r - c_bar > 0.0 { floor } else { floor + 1e-13 * scale };
        let g_hi = scalar::expand_until(scale.max(floor * 2.0), |g| foc(g) < 0.0)?;

        let root = if c_out == 0.0 {
            // Strictly decreasing in G.
            if !(foc(g_lo) > 0.0) {
                return None;
            }
            scalar::bisect(foc, g_lo, g_hi, 0.0)?
        } else {
            // The odds term of inactive perturbations makes the condition
            // non-monotone; the equilibrium is the largest root, where the
            // active players' payoffs are locally concave.
            let span = g_hi - g_lo;
            let mut prev = g_hi;
            let mut found = None;
            for j in 1..=800 {
                let g = g_lo + span * 2f64.powf(-(j as f64) / 8.0);
                if foc(g) > 0.0 {
                    found = Some((g, prev));
                    break;
                }
                prev = g;
                if g - g_lo < 1e-14 * scale {
                    break;
                }
            }
            let (a, b) = found?;
            scalar::bisect(foc, a, b, 0.0)?
        };

        let g = root.x;
        let pool = r + g - c_bar;
        let s = (0..c.len())
            .map(|i| if active[i] { c[i] + pool - pool * pool * (1.0 - profile.get(i).slope(g)) / r } else { 0.0 })
            .collect();
        Some((g, s))
    }

    fn finish(&self, d: &DesignPoint, g: f64, s: Vec<f64>, iterations: usize) -> Result<EquilibriumResult> {
        let n = self.players();
        let s: Vec<f64> = s.into_iter().map(|v| v.max(0.0)).collect();
        let total: f64 = s.iter().sum();
        let target = g + d.reward;
        if (total - target).abs() > 1e-8 * target.abs().max(1.0) {
            return Err(Error::InvariantViolation(format!(
                "active investments sum to {total}, expected G + R = {target}"
            )));
        }
        let active_set: Vec<usize> = (0..n).filter(|&i| s[i] > TOL_ACTIVE).collect();
        let mut max_foc_violation: f64 = 0.0;
        for (i, &si) in s.iter().enumerate() {
            let res = self.foc_unchecked(d, si, total, i)?;
            let v = if si > TOL_ACTIVE { res.abs() } else { res.max(0.0) };
            max_foc_violation = max_foc_violation.max(v);
        }
        let cap_exceeded = match &self.wealth_caps {
            Some(caps) => (0..n).filter(|&i| s[i] > caps[i]).collect(),
            None => Vec::new(),
        };
        Ok(EquilibriumResult {
            public_good: total - d.reward,
            pool: total - d.perturbation_sum,
            investments: s,
            active_set,
            max_foc_violation,
            iterations,
            cap_exceeded,
        })
    }

    /// Brute-force best response of player `i` to the other entries of `s`.
    ///
    /// Scans the payoff on a uniform grid over `[s_lo, s_hi]`, refines the best
    /// cell by golden-section search, and compares with the canceled-lottery
    /// alternative `s_i = 0`. `s_hi` is doubled until the marginal payoff is
    /// negative and `h_i' < 1`, beyond which the payoff only decreases.
    pub fn best_response(&self, d: &DesignPoint, s: &[f64], i: usize) -> Result<f64> {
        let n = self.players();
        d.check_players(n)?;
        check_investments(s, n)?;
        let others: f64 = s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum();
        let r = d.reward;
        let c_bar = d.perturbation_sum;
        let scale = r.max(c_bar).max(others).max(1.0);
        let held_from = (r - others).max(0.0);
        let pool_from = c_bar - others + 1e-9 * scale;
        let s_lo = held_from.max(pool_from).max(0.0);

        let u = |x: f64| self.payoff_unchecked(d, x, others + x, i).unwrap_or(f64::NEG_INFINITY);
        let h = self.profile.get(i);
        let s_hi = scalar::expand_until(s_lo.max(scale), |x| {
            let total = others + x;
            let g = total - r;
            g > 0.0 && h.slope(g) < 1.0 && self.foc_unchecked(d, x, total, i).is_ok_and(|m| m < 0.0)
        })
        .ok_or_else(|| Error::InvariantViolation("best-response search interval unbounded".into()))?;

        const CELLS: usize = 2000;
        let step = (s_hi - s_lo) / CELLS as f64;
        let (k_best, _) = (0..=CELLS).map(|k| (k, u(s_lo + step * k as f64))).fold((0, f64::NEG_INFINITY), |acc, p| {
            if p.1 > acc.1 {
                p
            } else {
                acc
            }
        });
        let a = s_lo + step * k_best.saturating_sub(1) as f64;
        let b = s_lo + step * (k_best + 1).min(CELLS) as f64;
        let (x, ux) = scalar::golden_section_max(u, a, b, 1e-9 * scale.clamp(1.0, 1e3));

        let (x, ux) = if u(s_lo) >= ux { (s_lo, u(s_lo)) } else { (x, ux) };
        if s_lo > 0.0 && others < r && ux < 0.0 {
            // Staying out cancels the lottery.
            return Ok(0.0);
        }
        Ok(x)
    }

    /// Largest payoff gain any single player can obtain by deviating from `s` to
    /// its [`best_response`](Self::best_response), with the index of that player.
    pub fn max_deviation_gain(&self, d: &DesignPoint, s: &[f64]) -> Result<(f64, usize)> {
        let mut worst = (f64::NEG_INFINITY, 0);
        let mut trial = s.to_vec();
        for i in 0..self.players() {
            let base = self.payoff(d, s, i)?;
            trial[i] = self.best_response(d, s, i)?;
            let gain = self.payoff(d, &trial, i)? - base;
            trial[i] = s[i];
            if gain > worst.0 {
                worst = (gain, i);
            }
        }
        Ok(worst)
    }

    /// Implicit-function sensitivities of the public good at an all-active equilibrium.
    pub fn sensitivities(&self, d: &DesignPoint, eq: &EquilibriumResult) -> Result<Sensitivities> {
        let n = self.players();
        d.check_players(n)?;
        if !eq.all_active() {
            return Err(Error::UnsupportedRegime(format!(
                "{} of {} players active; closed-form sensitivities need all players active",
                eq.active_set.len(),
                n
            )));
        }
        let r = d.reward;
        let g = eq.public_good;
        let c_bar = d.perturbation_sum;
        let pool = r + g - c_bar;
        let m = (n - 1) as f64;
        let denom = pool * pool * self.profile.aggregate_curvature(g) - r * m;
        if denom == 0.0 {
            return Err(Error::UnsupportedRegime("vanishing sensitivity denominator".into()));
        }
        let d_good_d_reward = -(g - c_bar) * m / denom;
        let d_c = -r * m / denom;
        Ok(Sensitivities { d_good_d_reward, d_good_d_perturbation: vec![d_c; n] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn i2() -> LotteryInstance {
        LotteryInstance::new(BenefitProfile::scaled_log(&[1.0, 1.0]).unwrap())
    }

    fn point(r: f64, c: &[f64]) -> DesignPoint {
        DesignPoint::new(r, c.to_vec()).unwrap()
    }

    #[test]
    fn payoff_examples() {
        let g = i2();
        let u = g.payoff(&point(1.0, &[0.0, 0.0]), &[0.75, 0.75], 0).unwrap();
        assert_abs_diff_eq!(u, 0.5 + 1.5f64.ln() - 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(u, 0.155465, epsilon = 1e-6);
        assert_eq!(g.payoff(&point(1.0, &[0.0, 0.0]), &[0.2, 0.3], 0).unwrap(), 0.0);
        // G = Σs − R = 1, so the benefit term is ln(2).
        let u = g.payoff(&point(1.0, &[0.5, 0.5]), &[1.0, 1.0], 0).unwrap();
        assert_abs_diff_eq!(u, 0.5 + 2f64.ln() - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn payoff_with_zero_pool_is_singular() {
        let g = i2();
        let err = g.payoff(&point(1.0, &[1.0, 1.0]), &[1.0, 1.0], 0).unwrap_err();
        assert!(matches!(err, Error::SingularPool));
        assert!(g.payoff(&point(1.0, &[0.0, 0.0]), &[-1.0, 3.0], 0).is_err());
    }

    #[test]
    fn negative_reward_share_is_not_clamped() {
        // c_1 exceeds s_1: player 1 pays a fine.
        let u = i2().payoff(&point(1.0, &[1.5, 0.0]), &[0.5, 2.0], 0).unwrap();
        assert_abs_diff_eq!(u, -1.0 + 2.5f64.ln() - 0.5, epsilon = 1e-15);
    }

    #[test]
    fn foc_residual_examples() {
        let g = i2();
        let r = g.foc_residual(&point(1.0, &[0.0, 0.0]), &[0.75, 0.75], 0).unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
        let r = g.foc_residual(&point(1.0, &[0.5, 0.5]), &[1.0, 1.0], 0).unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
        let r = g.foc_residual(&point(1.0, &[0.0, 0.0]), &[1.0, 1.0], 0).unwrap();
        assert_abs_diff_eq!(r, -0.25, epsilon = 1e-15);
        let err = g.foc_residual(&point(1.0, &[1.0, 1.0]), &[1.0, 1.0], 0).unwrap_err();
        assert!(matches!(err, Error::SingularPool));
    }

    #[test]
    fn equilibrium_examples() {
        let g = i2();
        let eq = g.solve_equilibrium(&point(1.0, &[0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(eq.investments[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.investments[1], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.public_good, 0.5, epsilon = 1e-12);
        assert_eq!(eq.active_set, vec![0, 1]);

        let eq = g.solve_equilibrium(&point(1.0, &[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(eq.public_good, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.investments[0], 1.0, epsilon = 1e-12);

        let eq = g.solve_equilibrium(&point(1.0, &[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(eq.public_good, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.investments[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(eq.investments[1], 0.5, epsilon = 1e-12);
        assert!(eq.max_foc_violation <= 1e-8);
    }

    #[test]
    fn weak_player_stays_out() {
        // With a small reward the strongest player funds G = 2 alone.
        let inst = LotteryInstance::new(BenefitProfile::scaled_log(&[3.0, 2.0, 0.05]).unwrap());
        let d = point(0.2, &[0.0, 0.0, 0.0]);
        let eq = inst.solve_equilibrium(&d).unwrap();
        assert_eq!(eq.active_set, vec![0]);
        assert_abs_diff_eq!(eq.public_good, 2.0, epsilon = 1e-12);
        assert!(eq.max_foc_violation <= 1e-8, "{eq:?}");
        for i in 1..3 {
            assert!(inst.best_response(&d, &eq.investments, i).unwrap() < 1e-6);
        }
    }

    #[test]
    fn single_player_reaches_social_optimum() {
        let inst = LotteryInstance::new(BenefitProfile::scaled_log(&[5.0]).unwrap());
        let d = point(1.0, &[0.0]);
        let eq = inst.solve_equilibrium(&d).unwrap();
        assert_abs_diff_eq!(eq.public_good, 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eq.investments[0], 5.0, epsilon = 1e-10);
        let br = inst.best_response(&d, &[0.0], 0).unwrap();
        assert_abs_diff_eq!(br, 5.0, epsilon = 1e-6);
    }

    #[test]
    fn best_response_examples() {
        let g = i2();
        let d = point(1.0, &[0.0, 0.0]);
        let br = g.best_response(&d, &[0.0, 0.75], 0).unwrap();
        assert_abs_diff_eq!(br, 0.75, epsilon = 1e-6);

        let br = g.best_response(&d, &[0.0, 10.0], 0).unwrap();
        let res = g.foc_residual(&d, &[br, 10.0], 0).unwrap();
        assert!(br < 1e-6 && res <= 0.0 || res.abs() <= 1e-6, "br = {br}, residual = {res}");
    }

    #[test]
    fn sensitivity_examples() {
        let g = i2();
        let d = point(1.0, &[0.0, 0.0]);
        let eq = g.solve_equilibrium(&d).unwrap();
        let sens = g.sensitivities(&d, &eq).unwrap();
        assert_abs_diff_eq!(sens.d_good_d_reward, 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sens.d_good_d_perturbation[0], 1.0 / 3.0, epsilon = 1e-12);

        let d = point(1.0, &[0.5, 0.5]);
        let eq = g.solve_equilibrium(&d).unwrap();
        let sens = g.sensitivities(&d, &eq).unwrap();
        assert_abs_diff_eq!(sens.d_good_d_reward, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sensitivities_need_all_players_active() {
        let inst = LotteryInstance::new(BenefitProfile::scaled_log(&[3.0, 2.0, 0.05]).unwrap());
        let d = point(0.2, &[0.0, 0.0, 0.0]);
        let eq = inst.solve_equilibrium(&d).unwrap();
        assert!(matches!(inst.sensitivities(&d, &eq), Err(Error::UnsupportedRegime(_))));
    }

    #[test]
    fn wealth_caps_are_reported_not_imposed() {
        let profile = BenefitProfile::scaled_log(&[1.0, 1.0]).unwrap();
        let inst = LotteryInstance::with_wealth_caps(profile, vec![0.5, 2.0]).unwrap();
        let eq = inst.solve_equilibrium(&point(1.0, &[0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(eq.investments[0], 0.75, epsilon = 1e-12);
        assert_eq!(eq.cap_exceeded, vec![0]);
    }

    #[test]
    fn design_point_validation() {
        assert!(DesignPoint::new(0.0, vec![0.0]).is_err());
        assert!(DesignPoint::new(1.0, vec![-0.1]).is_err());
        assert!(i2().solve_equilibrium(&point(1.0, &[0.0])).is_err());
        let d: DesignPoint = serde_json::from_str(r#"{"reward": 2.0, "perturbation": [0.5, 1.0]}"#).unwrap();
        assert_eq!(d.perturbation_sum(), 1.5);
    }
}
