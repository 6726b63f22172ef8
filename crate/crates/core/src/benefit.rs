//! Benefit functions `h_i`, their aggregate marginal `H(G)` and the socially
//! optimal public good `G*`.
//!
//! Every function maps the public good `v >= 0` to a benefit with `h(0) = 0`,
//! strictly increasing, strictly concave and with a slope that vanishes at
//! infinity. The profile additionally requires `H(0) = Σ h_i'(0) > 1`, which
//! guarantees a unique interior social optimum solving `H(G*) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, Error, Result};
use crate::extended::Extended;
use crate::scalar;

/// Parametric families of admissible benefit functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[non_exhaustive]
pub enum BenefitFamily {
    /// `h(v) = a · ln(v + 1)`.
    ScaledLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenefitFunction {
    family: BenefitFamily,
    coefficient: f64,
}

const SAMPLE_GRID: [f64; 9] = [0.0, 1e-3, 0.1, 0.5, 1.0, 3.0, 10.0, 100.0, 1e4];

impl BenefitFunction {
    pub fn new(family: BenefitFamily, coefficient: f64) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(Error::InvalidBenefit(format!("coefficient must be positive and finite, got {coefficient}")));
        }
        let f = Self { family, coefficient };
        f.validate_shape()?;
        Ok(f)
    }

    pub fn scaled_log(coefficient: f64) -> Result<Self> {
        Self::new(BenefitFamily::ScaledLog, coefficient)
    }

    pub fn family(&self) -> BenefitFamily {
        self.family
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    /// `h(v)`; callers guarantee `v >= 0`.
    #[inline]
    pub fn value(&self, v: f64) -> f64 {
        match self.family {
            BenefitFamily::ScaledLog => self.coefficient * v.ln_1p(),
        }
    }

    /// `h'(v)`.
    #[inline]
    pub fn slope(&self, v: f64) -> f64 {
        match self.family {
            BenefitFamily::ScaledLog => self.coefficient / (v + 1.0),
        }
    }

    /// `h''(v)`.
    #[inline]
    pub fn curvature(&self, v: f64) -> f64 {
        match self.family {
            BenefitFamily::ScaledLog => -self.coefficient / ((v + 1.0) * (v + 1.0)),
        }
    }

    /// Checked evaluation of `(h(v), h'(v))`.
    pub fn value_and_slope(&self, v: f64) -> Result<(f64, f64)> {
        check_nonneg("public good", v)?;
        Ok((self.value(v), self.slope(v)))
    }

    fn validate_shape(&self) -> Result<()> {
        if self.value(0.0) != 0.0 {
            return Err(Error::InvalidBenefit("h(0) must be 0".into()));
        }
        for w in SAMPLE_GRID.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(self.value(b) > self.value(a)) {
                return Err(Error::InvalidBenefit(format!("not increasing on [{a}, {b}]")));
            }
            if !(self.slope(b) < self.slope(a)) || self.curvature(a) >= 0.0 {
                return Err(Error::InvalidBenefit(format!("not strictly concave on [{a}, {b}]")));
            }
        }
        let tail = self.slope(1e12);
        if !(tail > 0.0 && tail < 1e-6 * self.slope(0.0)) {
            return Err(Error::InvalidBenefit("slope does not vanish at infinity".into()));
        }
        Ok(())
    }
}

/// Ordered benefit functions of all players.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenefitProfile {
    functions: Vec<BenefitFunction>,
    coefficient_sum: f64,
}

impl BenefitProfile {
    pub fn new(functions: Vec<BenefitFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidBenefit("profile needs at least one player".into()));
        }
        let coefficient_sum = functions.iter().map(|f| f.coefficient).sum();
        let profile = Self { functions, coefficient_sum };
        let h0 = profile.marginal_at_zero();
        if !(h0 > 1.0) {
            return Err(Error::InvalidBenefit(format!("aggregate marginal benefit at zero must exceed 1, got {h0}")));
        }
        Ok(profile)
    }

    /// Profile of `a_i · ln(v + 1)` functions.
    pub fn scaled_log(coefficients: &[f64]) -> Result<Self> {
        let functions = coefficients.iter().map(|&a| BenefitFunction::scaled_log(a)).collect::<Result<Vec<_>>>()?;
        Self::new(functions)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BenefitFunction] {
        &self.functions
    }

    pub fn get(&self, i: usize) -> &BenefitFunction {
        &self.functions[i]
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.coefficient_sum
    }

    /// `H(0)`, the upper end of the codomain of `H`.
    pub fn marginal_at_zero(&self) -> f64 {
        self.marginal(0.0)
    }

    /// Unchecked `H(G) = Σ h_i'(G)`.
    #[inline]
    pub fn marginal(&self, g: f64) -> f64 {
        self.functions.iter().map(|f| f.slope(g)).sum()
    }

    /// `H(G)`, rejecting negative `G`.
    pub fn aggregate_marginal(&self, g: f64) -> Result<f64> {
        check_nonneg("public good", g)?;
        Ok(self.marginal(g))
    }

    /// `H'(G) = Σ h_i''(G)`.
    pub fn aggregate_curvature(&self, g: f64) -> f64 {
        self.functions.iter().map(|f| f.curvature(g)).sum()
    }

    /// `Σ h_i(G)`.
    pub fn total_value(&self, g: f64) -> f64 {
        self.functions.iter().map(|f| f.value(g)).sum()
    }

    /// Aggregate payoff `Σ h_i(G) − G` induced by a public good `G`.
    pub fn welfare(&self, g: f64) -> f64 {
        self.total_value(g) - g
    }

    /// `G*`, the unique root of `H(G) = 1`.
    pub fn socially_optimal_good(&self) -> Result<f64> {
        let h0 = self.marginal_at_zero();
        if !(h0 > 1.0) {
            return Err(Error::InvariantViolation(format!("H(0) = {h0} <= 1")));
        }
        self.solve_marginal(1.0)
    }

    /// `Σ h_i(G*) − G*`.
    pub fn socially_optimal_payoff(&self) -> Result<f64> {
        Ok(self.welfare(self.socially_optimal_good()?))
    }

    /// `H⁻¹(y)`: the `G >= 0` with `H(G) = y` for `y ∈ (0, H(0)]`, `+∞` for `y <= 0`.
    pub fn invert_aggregate(&self, y: f64) -> Result<Extended> {
        let h0 = self.marginal_at_zero();
        if y.is_nan() {
            return Err(Error::InvalidArgument("H⁻¹ of NaN".into()));
        }
        if y <= 0.0 {
            return Ok(Extended::PosInfinity);
        }
        if y > h0 {
            return Err(Error::OutOfCodomain { value: y, max: h0 });
        }
        if y == h0 {
            return Ok(Extended::Finite(0.0));
        }
        self.solve_marginal(y).map(Extended::Finite)
    }

    fn solve_marginal(&self, y: f64) -> Result<f64> {
        let hi = scalar::expand_until(1.0, |g| self.marginal(g) < y)
            .ok_or_else(|| Error::InvariantViolation(format!("H(G) never drops below {y}")))?;
        let root = scalar::bisect(|g| self.marginal(g) - y, 0.0, hi, 0.0)
            .ok_or_else(|| Error::InvariantViolation(format!("H(G) - {y} has no sign change on [0, {hi}]")))?;
        Ok(root.x)
    }
}
