//! Seeded random instances and design problems for property checks, the
//! self-test, and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::RangeInclusive;

use crate::analysis;
use crate::benefit::BenefitProfile;
use crate::design::{ConstraintSet, DesignProblem};
use crate::error::Result;
use crate::game::{DesignPoint, LotteryInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Instance and design-point distribution.
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub players: RangeInclusive<usize>,
    pub coefficient: (f64, f64),
    /// `R` is drawn from `[R_L(c) + reward_margin, reward_max]`.
    pub reward_margin: f64,
    pub reward_max: f64,
    /// `c̄ / G*` is drawn from this range.
    pub perturbation_fraction: (f64, f64),
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            players: 2..=6,
            coefficient: (0.6, 3.0),
            reward_margin: 0.1,
            reward_max: 50.0,
            perturbation_fraction: (0.0, 1.0),
        }
    }
}

pub fn random_profile<R: Rng>(rng: &mut R, spec: &CorpusSpec) -> Result<BenefitProfile> {
    let n = rng.random_range(spec.players.clone());
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(spec.coefficient.0..=spec.coefficient.1)).collect();
    BenefitProfile::scaled_log(&a)
}

/// Splits `total` into `n` random nonnegative shares.
pub fn random_split<R: Rng>(rng: &mut R, n: usize, total: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return vec![total / n as f64; n];
    }
    w.iter().map(|x| total * x / sum).collect()
}

pub fn random_design_point<R: Rng>(rng: &mut R, p: &BenefitProfile, spec: &CorpusSpec) -> Result<DesignPoint> {
    let g_star = p.socially_optimal_good()?;
    let frac = if spec.perturbation_fraction.0 < spec.perturbation_fraction.1 {
        rng.random_range(spec.perturbation_fraction.0..spec.perturbation_fraction.1)
    } else {
        spec.perturbation_fraction.0
    };
    let c = random_split(rng, p.len(), frac * g_star);
    let lo = analysis::reward_threshold(p, &c)? + spec.reward_margin;
    let hi = spec.reward_max.max(lo + spec.reward_margin);
    DesignPoint::new(rng.random_range(lo..hi), c)
}

/// `count` independent `(instance, design point)` pairs.
pub fn sample(seed: u64, count: usize, spec: &CorpusSpec) -> Result<Vec<(LotteryInstance, DesignPoint)>> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let p = random_profile(&mut rng, spec)?;
            let d = random_design_point(&mut rng, &p, spec)?;
            Ok((LotteryInstance::new(p), d))
        })
        .collect()
}

/// A design problem with random affine rows that are satisfied at a planted
/// design `(R0, c0)` with `c̄0 = G*`, so the reformulation is feasible.
#[derive(Debug, Clone)]
pub struct PlantedProblem {
    pub problem: DesignProblem,
    pub planted: DesignPoint,
}

pub fn random_design_problem<R: Rng>(
    rng: &mut R,
    players: RangeInclusive<usize>,
    alpha: f64,
) -> Result<PlantedProblem> {
    let spec = CorpusSpec { players, ..CorpusSpec::default() };
    let profile = random_profile(rng, &spec)?;
    let n = profile.len();
    let inst = LotteryInstance::new(profile);
    let g_star = inst.profile().socially_optimal_good()?;
    let c0 = random_split(rng, n, g_star);
    let r0 = rng.random_range(0.5..4.0);
    let planted = DesignPoint::new(r0, c0)?;
    let bare = DesignProblem::new(inst.clone(), ConstraintSet::new(n), alpha)?;
    let s0 = bare.predicted_investments(&planted);

    let mut cs = ConstraintSet::new(n);
    let rows = rng.random_range(1..=3);
    for k in 0..rows {
        let investment: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reward = rng.random_range(-1.0..1.0);
        let at_plant: f64 = investment.iter().zip(&s0).map(|(a, s)| a * s).sum::<f64>() + reward * r0;
        let slack = rng.random_range(0.0..0.3);
        cs.add(investment, reward, at_plant + slack, format!("row{}", k + 1))?;
    }
    let problem = DesignProblem::new(inst, cs, alpha)?;
    Ok(PlantedProblem { problem, planted })
}
