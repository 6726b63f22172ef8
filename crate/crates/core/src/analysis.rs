//! Efficiency analysis of the perturbed lottery: the reward threshold `R_L(c)`,
//! equilibrium-free bounds on the public good, price-of-anarchy bounds, and a
//! report of the structural equilibrium properties.
//!
//! Notation: `Gᵁ = max(G*, c̄)`, `G_L = min(G*, c̄)`. The bound `Ḡ` is the one
//! farther from `G*` and `G̲` the nearer one, so that
//! `Σh(Ḡ) − Ḡ <= Σh(G) − G <= Σh(G̲) − G̲` in both branches `c̄ <= G*` and `c̄ > G*`.

use serde::Serialize;

use crate::benefit::BenefitProfile;
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::game::{DesignPoint, EquilibriumResult, LotteryInstance};
use crate::scalar;

/// Slack allowed on inequality properties.
pub const PROPERTY_TOL: f64 = 1e-9;
/// Slack allowed on the welfare sandwich.
pub const SANDWICH_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeConstants {
    pub g_star: f64,
    /// `Gᵁ = max(G*, c̄)`.
    pub good_upper_ref: f64,
    /// `G_L = min(G*, c̄)`.
    pub good_lower_ref: f64,
    /// `R_L(c)`.
    pub reward_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundBranch {
    PerturbationAtMostOptimum,
    PerturbationAboveOptimum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoaBounds {
    pub branch: BoundBranch,
    /// `Ḡ`: bound farther from `G*`.
    pub g_bar: f64,
    /// `G̲` as defined before the theorem statement.
    pub g_underline: f64,
    /// `G̲` after substituting the computed `Ḡ`, as done when proving the PoA bounds.
    pub g_underline_tightened: f64,
    /// `min(Ḡ, G̲)`.
    pub g_lower: f64,
    /// `max(Ḡ, G̲)`.
    pub g_upper: f64,
    pub poa_lower: Extended,
    pub poa_upper: Extended,
    pub poa_lower_tightened: Extended,
    /// Number of players with `R/(R+Gᵁ−c̄) + h_i'(Gᵁ) − 1 > 0`.
    pub strongly_active_count: usize,
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub property: String,
    pub holds: bool,
    pub margin: Option<f64>,
    pub skipped_reason: Option<String>,
}

impl PropertyOutcome {
    fn checked(property: &str, margin: f64, tol: f64) -> Self {
        Self { property: property.into(), holds: margin >= -tol, margin: Some(margin), skipped_reason: None }
    }

    fn skipped(property: &str, reason: impl Into<String>) -> Self {
        Self { property: property.into(), holds: true, margin: None, skipped_reason: Some(reason.into()) }
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped_reason.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub items: Vec<PropertyOutcome>,
}

impl PropertyReport {
    pub fn all_hold(&self) -> bool {
        self.items.iter().all(|p| p.holds)
    }

    pub fn get(&self, property: &str) -> Option<&PropertyOutcome> {
        self.items.iter().find(|p| p.property == property)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyOutcome> {
        self.items.iter().filter(|p| !p.holds)
    }
}

fn check_len(p: &BenefitProfile, c: &[f64]) -> Result<()> {
    if c.len() != p.len() {
        return Err(Error::Dimension(format!("{} perturbations for {} players", c.len(), p.len())));
    }
    Ok(())
}

/// `R_L(c)`: the unique `R` with `R / (R + Gᵁ − c̄) = max_i (1 − h_i'(Gᵁ))`.
pub fn reward_threshold(p: &BenefitProfile, c: &[f64]) -> Result<f64> {
    Ok(regime_constants(p, c)?.reward_threshold)
}

pub fn regime_constants(p: &BenefitProfile, c: &[f64]) -> Result<RegimeConstants> {
    check_len(p, c)?;
    let g_star = p.socially_optimal_good()?;
    let c_bar: f64 = c.iter().sum();
    let g_up = g_star.max(c_bar);
    let g_lo = g_star.min(c_bar);
    let m = p.functions().iter().map(|f| 1.0 - f.slope(g_up)).fold(f64::NEG_INFINITY, f64::max);
    if m >= 1.0 {
        return Err(Error::InvariantViolation(format!("max_i (1 − h_i'(Gᵁ)) = {m} >= 1")));
    }
    let gap = g_up - c_bar;
    let reward_threshold = if m <= 0.0 || gap <= 0.0 {
        0.0
    } else {
        // R/(R+gap) increases from 0 to 1, so the root is bracketed by doubling.
        let f = |r: f64| r / (r + gap) - m;
        let hi = scalar::expand_until(gap.max(1e-12), |r| f(r) > 0.0)
            .ok_or_else(|| Error::InvariantViolation("R_L bracket did not close".into()))?;
        scalar::bisect(f, 0.0, hi, 0.0).ok_or_else(|| Error::InvariantViolation("R_L bisection failed".into()))?.x
    };
    Ok(RegimeConstants { g_star, good_upper_ref: g_up, good_lower_ref: g_lo, reward_threshold })
}

/// Closed form `m (Gᵁ − c̄) / (1 − m)` of the reward threshold.
pub fn reward_threshold_closed_form(p: &BenefitProfile, c: &[f64]) -> Result<f64> {
    let k = regime_constants(p, c)?;
    let c_bar: f64 = c.iter().sum();
    let m = p.functions().iter().map(|f| 1.0 - f.slope(k.good_upper_ref)).fold(f64::NEG_INFINITY, f64::max);
    Ok(if m <= 0.0 { 0.0 } else { m * (k.good_upper_ref - c_bar) / (1.0 - m) })
}

fn strongly_active_count(p: &BenefitProfile, r: f64, g_up: f64, c_bar: f64) -> usize {
    let odds = r / (r + g_up - c_bar);
    p.functions().iter().filter(|f| odds + f.slope(g_up) - 1.0 > 0.0).count()
}

/// `H⁻¹(arg)` for a bound; `+∞` is clamped into the `[min(c̄,G*), max(c̄,G*)]` bracket.
fn bound_inverse(
    p: &BenefitProfile,
    which: &'static str,
    argument: f64,
    bracket: (f64, f64),
    strict: bool,
) -> Result<f64> {
    match p.invert_aggregate(argument) {
        Ok(Extended::PosInfinity) => Ok(bracket.1),
        Ok(Extended::Finite(g)) => Ok(g),
        Err(Error::OutOfCodomain { value, max }) => {
            if strict {
                Err(Error::DegenerateBound { which, argument: value, h0: max })
            } else {
                // H(G) <= H(0) < argument everywhere: the bound only says G >= 0.
                Ok(0.0)
            }
        }
        Err(e) => Err(e),
    }
}

fn ratio_or_neg_inf(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

fn bounds_impl(p: &BenefitProfile, d: &DesignPoint, strict: bool) -> Result<PoaBounds> {
    check_len(p, d.perturbation())?;
    let k = regime_constants(p, d.perturbation())?;
    let (g_star, g_up, g_lo) = (k.g_star, k.good_upper_ref, k.good_lower_ref);
    let r = d.reward();
    let c_bar = d.perturbation_sum();
    let n = p.len() as f64;
    let va = strongly_active_count(p, r, g_up, c_bar);
    let va_m1 = va as f64 - 1.0;
    let bracket = (g_lo, g_up);

    let (branch, g_bar, g_underline, g_underline_tightened) = if c_bar <= g_star {
        let arg_under = va_m1 * ratio_or_neg_inf(g_lo - c_bar, r + g_up - c_bar) + 1.0;
        let arg_bar = (n - 1.0) * ratio_or_neg_inf(g_up - c_bar, r + g_lo - c_bar) + 1.0;
        let g_bar = bound_inverse(p, "lower", arg_bar, bracket, strict)?;
        let g_under = bound_inverse(p, "upper", arg_under, bracket, strict)?;
        let arg_tight = va_m1 * ratio_or_neg_inf(g_bar.max(c_bar) - c_bar, r + g_up - c_bar) + 1.0;
        let g_tight = bound_inverse(p, "tightened upper", arg_tight, bracket, false)?.min(g_under);
        (BoundBranch::PerturbationAtMostOptimum, g_bar, g_under, g_tight)
    } else {
        let arg_bar = va_m1 * ratio_or_neg_inf(g_lo - c_bar, r + g_lo - c_bar) + 1.0;
        let arg_under = (n - 1.0) * ratio_or_neg_inf(g_up - c_bar, r + g_up - c_bar) + 1.0;
        let g_bar = bound_inverse(p, "upper", arg_bar, bracket, strict)?;
        let g_under = bound_inverse(p, "lower", arg_under, bracket, strict)?;
        (BoundBranch::PerturbationAboveOptimum, g_bar, g_under, g_under)
    };

    let optimum = p.welfare(g_star);
    let poa = |g: f64| Extended::ratio(optimum, p.welfare(g));
    Ok(PoaBounds {
        branch,
        g_bar,
        g_underline,
        g_underline_tightened,
        g_lower: g_bar.min(g_underline),
        g_upper: g_bar.max(g_underline),
        poa_lower: poa(g_underline),
        poa_upper: poa(g_bar),
        poa_lower_tightened: poa(g_underline_tightened),
        strongly_active_count: va,
    })
}

/// Public-good bounds `Ḡ`, `G̲` from the theorem-statement formulas.
///
/// Fails with [`Error::DegenerateBound`] when a formula's argument exceeds `H(0)`.
pub fn public_good_bounds(p: &BenefitProfile, d: &DesignPoint) -> Result<PoaBounds> {
    bounds_impl(p, d, true)
}

/// Price-of-anarchy bounds. Degenerate public-good bounds are treated as vacuous
/// (`G >= 0`) and nonpositive welfare denominators map to `+∞`.
pub fn poa_bounds(p: &BenefitProfile, d: &DesignPoint) -> Result<PoaBounds> {
    bounds_impl(p, d, false)
}

/// `(Σh(G*) − G*) / (Σh(G) − G)` at the solved equilibrium.
pub fn true_poa(inst: &LotteryInstance, d: &DesignPoint) -> Result<Extended> {
    let eq = inst.solve_equilibrium(d)?;
    poa_at(inst.profile(), eq.public_good)
}

/// PoA induced by a public good `g`.
pub fn poa_at(p: &BenefitProfile, g: f64) -> Result<Extended> {
    let optimum = p.socially_optimal_payoff()?;
    Ok(Extended::ratio(optimum, p.welfare(g)))
}

/// Lower bound on player `i`'s investment when `R > R_L(c)`.
pub fn investment_lower_bound(p: &BenefitProfile, d: &DesignPoint, g_up: f64, i: usize) -> f64 {
    let r = d.reward();
    let c_bar = d.perturbation_sum();
    d.perturbation()[i] + r * (r / (r + g_up - c_bar) + p.get(i).slope(g_up) - 1.0)
}

/// Checks the equilibrium properties P2–P5 at a solved design point.
pub fn check_properties(inst: &LotteryInstance, d: &DesignPoint, eq: &EquilibriumResult) -> Result<PropertyReport> {
    let p = inst.profile();
    let n = inst.players();
    let k = regime_constants(p, d.perturbation())?;
    let g_star = k.g_star;
    let r = d.reward();
    let c_bar = d.perturbation_sum();
    let g = eq.public_good;
    let hypothesis = c_bar <= g + r + PROPERTY_TOL;
    let optimal_slice = (c_bar - g_star).abs() <= 1e-9 * g_star.max(1.0);
    let mut items = Vec::new();

    // P2
    if n < 2 {
        items.push(PropertyOutcome::skipped("P2_pool_positive", "single player"));
    } else if (g - g_star).abs() <= 1e-6 * g_star.max(1.0) {
        items.push(PropertyOutcome::checked("P2_pool_positive", g + r - c_bar, PROPERTY_TOL));
    } else {
        items.push(PropertyOutcome::skipped("P2_pool_positive", "equilibrium good differs from G*"));
    }

    // P3 bracket
    if hypothesis {
        let margin = (g - k.good_lower_ref).min(k.good_upper_ref - g);
        items.push(PropertyOutcome::checked("P3_bracket", margin, PROPERTY_TOL));
    } else {
        items.push(PropertyOutcome::skipped("P3_bracket", "c̄ > G + R"));
    }

    // P3 sensitivity signs
    if !hypothesis {
        items.push(PropertyOutcome::skipped("P3_sensitivity_signs", "c̄ > G + R"));
    } else if n < 2 {
        items.push(PropertyOutcome::skipped("P3_sensitivity_signs", "single player"));
    } else if !eq.all_active() {
        items.push(PropertyOutcome::skipped("P3_sensitivity_signs", "not all players active"));
    } else {
        let sens = inst.sensitivities(d, eq)?;
        let reward_margin = (g_star - c_bar).signum() * sens.d_good_d_reward;
        let min_dc = sens.d_good_d_perturbation.iter().copied().fold(f64::INFINITY, f64::min);
        items.push(PropertyOutcome::checked("P3_dG_dR_sign", reward_margin, PROPERTY_TOL));
        if optimal_slice {
            items.push(PropertyOutcome::checked("P3_dG_dc_positive", min_dc, PROPERTY_TOL));
        } else {
            let mut o = PropertyOutcome::checked("P3_dG_dc_positive", min_dc, 0.0);
            o.holds = min_dc > 0.0;
            items.push(o);
        }
    }

    // P4
    if r > k.reward_threshold {
        let bounds: Vec<f64> = (0..n).map(|i| investment_lower_bound(p, d, k.good_upper_ref, i)).collect();
        let margin = (0..n).map(|i| eq.investments[i] - bounds[i]).fold(f64::INFINITY, f64::min);
        let min_bound = bounds.iter().copied().fold(f64::INFINITY, f64::min);
        items.push(PropertyOutcome::checked("P4_investment_lower_bound", margin, PROPERTY_TOL));
        let mut positive = PropertyOutcome::checked("P4_bound_positive", min_bound, 0.0);
        positive.holds = min_bound > 0.0;
        items.push(positive);
    } else {
        let reason = format!("R = {r} does not exceed R_L = {}", k.reward_threshold);
        items.push(PropertyOutcome::skipped("P4_investment_lower_bound", reason.clone()));
        items.push(PropertyOutcome::skipped("P4_bound_positive", reason));
    }

    // P5
    if hypothesis {
        let b = poa_bounds(p, d)?;
        let w = p.welfare(g);
        let margin = (w - p.welfare(b.g_bar)).min(p.welfare(b.g_underline) - w);
        items.push(PropertyOutcome::checked("P5_sandwich", margin, SANDWICH_TOL));
        let margin = (w - p.welfare(b.g_bar)).min(p.welfare(b.g_underline_tightened) - w);
        items.push(PropertyOutcome::checked("P5_sandwich_tightened", margin, SANDWICH_TOL));
    } else {
        items.push(PropertyOutcome::skipped("P5_sandwich", "c̄ > G + R"));
        items.push(PropertyOutcome::skipped("P5_sandwich_tightened", "c̄ > G + R"));
    }

    Ok(PropertyReport { items })
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
    fn reward_threshold_examples() {
        let p = i2().profile().clone();
        assert_abs_diff_eq!(reward_threshold(&p, &[0.0, 0.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(reward_threshold(&p, &[0.5, 0.5]).unwrap(), 0.0);
        assert_abs_diff_eq!(reward_threshold_closed_form(&p, &[0.0, 0.0]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reward_threshold_is_zero_for_single_player_at_optimum() {
        // N = 1: h'(G*) = 1, so max_i (1 − h_i'(Gᵁ)) = 0.
        let p = BenefitProfile::scaled_log(&[5.0]).unwrap();
        assert_eq!(reward_threshold(&p, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn reward_threshold_matches_closed_form() {
        let p = BenefitProfile::scaled_log(&[3.0, 1.5, 0.7]).unwrap();
        for c in [[0.0, 0.0, 0.0], [1.0, 0.2, 0.0], [2.0, 2.0, 1.0]] {
            let a = reward_threshold(&p, &c).unwrap();
            let b = reward_threshold_closed_form(&p, &c).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10 * b.max(1.0));
        }
    }

    #[test]
    fn public_good_bound_examples() {
        let p = i2().profile().clone();
        let b = public_good_bounds(&p, &point(1.0, &[0.0, 0.0])).unwrap();
        assert_eq!(b.branch, BoundBranch::PerturbationAtMostOptimum);
        assert_abs_diff_eq!(b.g_bar, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.g_underline, 1.0, epsilon = 1e-12);
        assert_eq!(b.strongly_active_count, 0);

        let b = public_good_bounds(&p, &point(1.0, &[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(b.g_bar, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.g_underline, 1.0, epsilon = 1e-12);

        let b = public_good_bounds(&p, &point(100.0, &[0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(b.g_bar, 2.0 / 1.01 - 1.0, epsilon = 1e-12);
        assert!(b.g_bar > 0.98 && b.g_bar < 0.9803);
    }

    #[test]
    fn degenerate_bound_is_an_error_but_vacuous_for_poa() {
        let p = i2().profile().clone();
        let d = point(0.5, &[0.0, 0.0]);
        assert!(matches!(public_good_bounds(&p, &d), Err(Error::DegenerateBound { .. })));
        let b = poa_bounds(&p, &d).unwrap();
        assert_eq!(b.g_bar, 0.0);
        assert_eq!(b.poa_upper, Extended::PosInfinity);
    }

    #[test]
    fn poa_bound_examples() {
        let p = i2().profile().clone();
        let b = poa_bounds(&p, &point(1.0, &[0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(b.poa_lower.to_f64(), 1.0, epsilon = 1e-12);
        assert_eq!(b.poa_upper, Extended::PosInfinity);

        let b = poa_bounds(&p, &point(1.0, &[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(b.poa_lower.to_f64(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.poa_upper.to_f64(), 1.0, epsilon = 1e-12);

        let d = point(100.0, &[0.0, 0.0]);
        let b = poa_bounds(&p, &d).unwrap();
        let g_bar: f64 = 2.0 / 1.01 - 1.0;
        let expected = (2.0 * 2f64.ln() - 1.0) / (2.0 * (1.0 + g_bar).ln() - g_bar);
        assert_abs_diff_eq!(b.poa_upper.to_f64(), expected, epsilon = 1e-10);
        assert!((b.poa_upper.to_f64() - 1.0002).abs() < 1e-4);
        let truth = true_poa(&i2(), &d).unwrap().to_f64();
        assert!(b.poa_lower.to_f64() <= truth && truth <= b.poa_upper.to_f64());
        assert!(truth > 1.0);
    }

    #[test]
    fn true_poa_examples() {
        let inst = i2();
        let poa = true_poa(&inst, &point(1.0, &[0.0, 0.0])).unwrap().to_f64();
        let expected = (2.0 * 2f64.ln() - 1.0) / (2.0 * 1.5f64.ln() - 0.5);
        assert_abs_diff_eq!(poa, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(poa, 1.2425, epsilon = 1e-3);
        for r in [0.3, 1.0, 7.0] {
            let poa = true_poa(&inst, &point(r, &[0.5, 0.5])).unwrap().to_f64();
            assert_abs_diff_eq!(poa, 1.0, epsilon = 1e-12);
        }
        let at_ten = true_poa(&inst, &point(10.0, &[0.0, 0.0])).unwrap().to_f64();
        assert!(at_ten > 1.0 && at_ten < poa);
    }

    #[test]
    fn property_report_examples() {
        let inst = i2();
        let d = point(1.0, &[0.5, 0.5]);
        let eq = inst.solve_equilibrium(&d).unwrap();
        let rep = check_properties(&inst, &d, &eq).unwrap();
        assert!(rep.all_hold(), "{rep:?}");
        assert!(!rep.get("P2_pool_positive").unwrap().is_skipped());

        let d = point(1.0, &[0.0, 0.0]);
        let eq = inst.solve_equilibrium(&d).unwrap();
        let rep = check_properties(&inst, &d, &eq).unwrap();
        assert!(rep.all_hold(), "{rep:?}");
        assert!(rep.get("P4_investment_lower_bound").unwrap().is_skipped());

        let d = point(1.5, &[0.0, 0.0]);
        let eq = inst.solve_equilibrium(&d).unwrap();
        let rep = check_properties(&inst, &d, &eq).unwrap();
        assert!(rep.all_hold(), "{rep:?}");
        let p4 = rep.get("P4_investment_lower_bound").unwrap();
        assert!(!p4.is_skipped() && p4.holds);
    }

    #[test]
    fn property_report_serializes_expected_fields() {
        let inst = i2();
        let d = point(1.0, &[0.0, 0.0]);
        let eq = inst.solve_equilibrium(&d).unwrap();
        let rep = check_properties(&inst, &d, &eq).unwrap();
        let json = serde_json::to_value(&rep.items[0]).unwrap();
        for key in ["property", "holds", "margin", "skipped_reason"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
