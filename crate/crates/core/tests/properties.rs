use perturbed_lottery::analysis::{self, BoundBranch};
use perturbed_lottery::corpus;
use perturbed_lottery::design::{self, ConstraintSet, DesignProblem};
use perturbed_lottery::grid::{self, Branch, Bus, GridCase};
use perturbed_lottery::{BenefitProfile, DesignPoint, LotteryInstance};
use proptest::prelude::*;
use rand::Rng;

fn coefficients() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.6..3.0f64, 2..=6)
}

/// Instance plus a design point with `c̄ = fraction·G*` split by `weights` and
/// `R = R_L(c) + margin`.
fn design_point(a: &[f64], weights: &[f64], fraction: f64, margin: f64) -> (LotteryInstance, DesignPoint) {
    let p = BenefitProfile::scaled_log(a).unwrap();
    let g_star = p.socially_optimal_good().unwrap();
    let w: f64 = weights[..a.len()].iter().sum();
    let c: Vec<f64> = weights[..a.len()].iter().map(|x| fraction * g_star * x / w).collect();
    let r = analysis::reward_threshold(&p, &c).unwrap() + margin;
    (LotteryInstance::new(p), DesignPoint::new(r, c).unwrap())
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05..1.0f64, 6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregate_marginal_round_trip(a in coefficients(), t in 0.01..1.0f64) {
        let p = BenefitProfile::scaled_log(&a).unwrap();
        let y = t * p.marginal_at_zero();
        let g = p.invert_aggregate(y).unwrap().to_f64();
        prop_assert!((p.aggregate_marginal(g).unwrap() - y).abs() <= 1e-8);
        prop_assert!(p.aggregate_marginal(g + 0.1).unwrap() < p.aggregate_marginal(g).unwrap());
    }

    #[test]
    fn optimum_is_strict(a in coefficients()) {
        let p = BenefitProfile::scaled_log(&a).unwrap();
        let g_star = p.socially_optimal_good().unwrap();
        prop_assert!((p.aggregate_marginal(g_star).unwrap() - 1.0).abs() <= 1e-10);
        for k in [0.5, 0.9, 1.1, 2.0] {
            prop_assert!(p.welfare(k * g_star) < p.welfare(g_star));
        }
    }

    #[test]
    fn classic_payoff_reduction(a in coefficients(), s in prop::collection::vec(0.0..5.0f64, 6), r in 0.1..10.0f64) {
        let n = a.len();
        let inst = LotteryInstance::new(BenefitProfile::scaled_log(&a).unwrap());
        let s = &s[..n];
        let d = DesignPoint::unperturbed(r, n).unwrap();
        let total: f64 = s.iter().sum();
        for i in 0..n {
            let classic = if total >= r && total > 0.0 {
                s[i] / total * r + inst.profile().get(i).value(total - r) - s[i]
            } else {
                0.0
            };
            prop_assert_eq!(inst.payoff(&d, s, i).unwrap(), classic);
        }
    }

    #[test]
    fn equilibrium_is_unique_across_starts(a in coefficients(), w in weights(), f in 0.0..1.0f64, m in 0.1..20.0f64, seed in any::<u64>()) {
        let (inst, d) = design_point(&a, &w, f, m);
        let base = inst.solve_equilibrium(&d).unwrap();
        prop_assert!(base.max_foc_violation <= 1e-8);
        let mut rng = corpus::rng(seed);
        for _ in 0..5 {
            let start: Vec<bool> = (0..a.len()).map(|_| rng.random_bool(0.5)).collect();
            let other = inst.solve_equilibrium_from(&d, &start).unwrap();
            for (x, y) in base.investments.iter().zip(&other.investments) {
                prop_assert!((x - y).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn public_good_bracket_and_regime(a in coefficients(), w in weights(), f in 0.0..=1.0f64, m in 0.1..20.0f64) {
        let (inst, d) = design_point(&a, &w, f, m);
        let eq = inst.solve_equilibrium(&d).unwrap();
        let g_star = inst.profile().socially_optimal_good().unwrap();
        let c_bar = d.perturbation_sum();
        prop_assert!(eq.public_good >= c_bar.min(g_star) - 1e-9);
        prop_assert!(eq.public_good <= c_bar.max(g_star) + 1e-9);
        if (eq.public_good - g_star).abs() <= 1e-6 {
            prop_assert!(c_bar <= eq.public_good + d.reward() + 1e-9);
        }
    }

    #[test]
    fn raising_reward_raises_good(a in coefficients(), w in weights(), f in 0.0..0.95f64, m in 0.1..20.0f64) {
        let (inst, d) = design_point(&a, &w, f, m);
        let eq = inst.solve_equilibrium(&d).unwrap();
        prop_assume!(eq.all_active());
        let up = DesignPoint::new(d.reward() * 1.01, d.perturbation().to_vec()).unwrap();
        prop_assert!(inst.solve_equilibrium(&up).unwrap().public_good - eq.public_good >= -1e-9);
        for i in 0..a.len() {
            let mut c = d.perturbation().to_vec();
            c[i] += 1e-3 * (1.0 - f);
            let g = inst.solve_equilibrium(&DesignPoint::new(d.reward(), c).unwrap()).unwrap().public_good;
            prop_assert!(g > eq.public_good);
        }
    }

    #[test]
    fn investment_lower_bound_above_threshold(a in coefficients(), w in weights(), f in 0.0..=1.0f64, m in 1e-3..20.0f64) {
        let (inst, d) = design_point(&a, &w, f, m);
        let eq = inst.solve_equilibrium(&d).unwrap();
        let k = analysis::regime_constants(inst.profile(), d.perturbation()).unwrap();
        for i in 0..a.len() {
            let lb = analysis::investment_lower_bound(inst.profile(), &d, k.good_upper_ref, i);
            prop_assert!(eq.investments[i] >= lb - 1e-9);
        }
    }

    #[test]
    fn bounds_positive_just_above_threshold(a in coefficients(), w in weights(), f in 0.0..=1.0f64) {
        let (inst, d) = design_point(&a, &w, f, 0.0);
        let k = analysis::regime_constants(inst.profile(), d.perturbation()).unwrap();
        let d = DesignPoint::new(k.reward_threshold * (1.0 + 1e-6) + 1e-12, d.perturbation().to_vec()).unwrap();
        for i in 0..a.len() {
            prop_assert!(analysis::investment_lower_bound(inst.profile(), &d, k.good_upper_ref, i) > 0.0);
        }
    }

    #[test]
    fn welfare_sandwich(a in coefficients(), w in weights(), f in 0.0..=1.0f64, m in 0.1..50.0f64) {
        let (inst, d) = design_point(&a, &w, f, m);
        let eq = inst.solve_equilibrium(&d).unwrap();
        let p = inst.profile();
        let b = analysis::poa_bounds(p, &d).unwrap();
        prop_assert_eq!(b.branch, BoundBranch::PerturbationAtMostOptimum);
        let at = p.welfare(eq.public_good);
        prop_assert!(p.welfare(b.g_bar) - 1e-7 <= at);
        prop_assert!(at <= p.welfare(b.g_underline) + 1e-7);
    }

    #[test]
    fn welfare_sandwich_above_optimum(a in coefficients(), w in weights(), f in 1.01..2.0f64, m in 0.1..50.0f64) {
        let (inst, d) = design_point(&a, &w, f, m);
        let eq = inst.solve_equilibrium(&d).unwrap();
        let p = inst.profile();
        let b = analysis::poa_bounds(p, &d).unwrap();
        prop_assert_eq!(b.branch, BoundBranch::PerturbationAboveOptimum);
        prop_assert!(b.g_lower - 1e-9 <= eq.public_good && eq.public_good <= b.g_upper + 1e-9,
            "G = {} outside [{}, {}]", eq.public_good, b.g_lower, b.g_upper);
    }

    #[test]
    fn shift_factor_conservation(seed in any::<u64>()) {
        let mut rng = corpus::rng(seed);
        let nb = rng.random_range(3..9);
        let mut branches: Vec<Branch> = (2..=nb)
            .map(|k| Branch { from: rng.random_range(1..k), to: k, resistance: 0.0, reactance: rng.random_range(0.05..0.5), limit: None })
            .collect();
        for _ in 0..rng.random_range(0..4) {
            let (f, t) = (rng.random_range(1..=nb), rng.random_range(1..=nb));
            if f != t {
                branches.push(Branch { from: f, to: t, resistance: 0.0, reactance: rng.random_range(0.05..0.5), limit: None });
            }
        }
        let slack = rng.random_range(1..=nb);
        let g = GridCase {
            base_mva: 100.0,
            buses: (1..=nb).map(|id| Bus { id, kind: if id == slack { 3 } else { 1 }, demand: 0.0 }).collect(),
            generators: Vec::new(),
            branches,
            slack,
        };
        let h = grid::shift_factor_matrix(&g).unwrap();
        prop_assert!(h.column(slack - 1).iter().all(|v| *v == 0.0));
        let mut x: Vec<f64> = (0..nb).map(|_| rng.random_range(-1.0..1.0)).collect();
        let total: f64 = x.iter().sum();
        x[slack - 1] -= total;
        let flows = &h * nalgebra::DVector::from_vec(x.clone());
        for bus in 1..=nb {
            let mut net = 0.0;
            for (l, br) in g.branches.iter().enumerate() {
                if br.from == bus { net += flows[l]; }
                if br.to == bus { net -= flows[l]; }
            }
            prop_assert!((net - x[bus - 1]).abs() <= 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn optimum_needs_perturbation_at_optimum(a in prop::collection::vec(0.6..3.0f64, 2..=3), off in prop::sample::select(vec![-0.5, -0.2, -0.05, 0.05, 0.2, 0.5])) {
        let inst = LotteryInstance::new(BenefitProfile::scaled_log(&a).unwrap());
        let p = DesignProblem::new(inst, ConstraintSet::new(a.len()), 1.0).unwrap();
        let rewards: Vec<f64> = (1..=40).map(|k| 0.25 * k as f64).collect();
        let c_bar = p.g_star() * (1.0 + off);
        let scan = design::scan_perturbation_slice(&p, c_bar, 8, &rewards, 1e-3).unwrap();
        prop_assert!(scan.evaluated > 0);
        prop_assert_eq!(scan.reaching_optimum, 0, "closest gap {}", scan.min_good_gap);
    }

    #[test]
    fn lp_optima_verify(seed in any::<u64>()) {
        let mut rng = corpus::rng(seed);
        let pp = corpus::random_design_problem(&mut rng, 2..=4, 1.0).unwrap();
        let sol = design::solve_design(&pp.problem).unwrap();
        prop_assert!(design::verify_design(&pp.problem, &sol).is_ok());
        prop_assert!(sol.objective.unwrap() <= pp.planted.reward() + pp.problem.alpha() * pp.problem.g_star() + 1e-9);
    }
}
