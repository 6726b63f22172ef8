//! Scenario runner behind the `lottery` CLI: loads a TOML scenario, runs one of
//! the pipelines, and writes `report.json` plus CSV tables.

mod config;
mod report;

pub use config::{
    BenefitSpec, ConstraintSource, Pipeline, PointSpec, ScenarioConfig, SelftestSpec, SweepSpec, Tolerances,
    OUT_DIR_ENV,
};
pub use report::{emit_report, money, Check, Report, Table};

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::analysis::{self, PropertyOutcome, PropertyReport};
use crate::benefit::BenefitProfile;
use crate::corpus;
use crate::design::{self, BruteForceGrid, ConstraintSet, DesignProblem, DesignSolution};
use crate::error::{Error, Result};
use crate::extended::Extended;
use crate::game::{DesignPoint, LotteryInstance};
use crate::grid::{self, DrScenario};
use crate::lp::LpStatus;
use crate::par;
use report::{ext, num};

/// Exit status for a run whose verifications failed.
pub const EXIT_VERIFICATION_FAILED: i32 = 2;
/// Exit status for configuration and I/O errors.
pub const EXIT_CONFIG_ERROR: i32 = 1;

/// Command-line overrides; each takes precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub pipeline: Option<Pipeline>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            EXIT_VERIFICATION_FAILED
        }
    }
}

/// Output directory: CLI flag, then `LOTTERY_OUT_DIR`, then the config, then `./out`.
pub fn resolve_out_dir(cfg: &ScenarioConfig, flag: Option<&PathBuf>) -> PathBuf {
    if let Some(p) = flag {
        return p.clone();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    match &cfg.output_dir {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => cfg.base_dir.join(p),
        None => PathBuf::from("out"),
    }
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let pipeline = opts.pipeline.or(cfg.pipeline).ok_or_else(|| Error::Config("no pipeline selected".into()))?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let workers = opts.workers.or(cfg.workers);
    let out_dir = resolve_out_dir(cfg, opts.out_dir.as_ref());
    let (mut report, tables) = par::with_workers(workers, || execute(pipeline, cfg, seed))??;
    report.finalize();
    emit_report(&out_dir, &mut report, &tables)?;
    Ok(RunOutcome { report, out_dir })
}

fn execute(pipeline: Pipeline, cfg: &ScenarioConfig, seed: u64) -> Result<(Report, Vec<Table>)> {
    let mut report = Report::new(pipeline, seed, cfg.tolerances.clone());
    let tables = match pipeline {
        Pipeline::Equilibrium => run_equilibrium(cfg, &mut report)?,
        Pipeline::Analyze => run_analyze(cfg, &mut report)?,
        Pipeline::Design => run_design(cfg, &mut report)?,
        Pipeline::Casestudy => run_casestudy(cfg, &mut report)?,
        Pipeline::Selftest => run_selftest(cfg, seed, &mut report)?,
    };
    Ok((report, tables))
}

struct Setup {
    instance: LotteryInstance,
    scenario: Option<DrScenario>,
    constraints: ConstraintSet,
}

impl Setup {
    fn player_labels(&self) -> Vec<String> {
        match &self.scenario {
            Some(s) => s.load_buses.iter().map(|b| b.to_string()).collect(),
            None => (1..=self.instance.players()).map(|i| i.to_string()).collect(),
        }
    }

    fn player_column(&self) -> &'static str {
        if self.scenario.is_some() {
            "bus"
        } else {
            "player"
        }
    }
}

fn setup(cfg: &ScenarioConfig) -> Result<Setup> {
    let scenario = match (&cfg.constraints, cfg.grid_case()?) {
        (ConstraintSource::Grid { scale, rate, hours, .. }, Some(case)) => {
            Some(grid::monetize(&case, *scale, *rate, *hours)?)
        }
        _ => None,
    };
    let profile = cfg.profile(scenario.as_ref().map(|s| s.load_buses.as_slice()))?;
    let n = profile.len();
    let constraints = match (&cfg.constraints, &scenario) {
        (ConstraintSource::None, _) => ConstraintSet::new(n),
        (ConstraintSource::Inline { rows }, _) => {
            let mut cs = ConstraintSet::new(n);
            for row in rows {
                cs.push(row.clone())?;
            }
            cs
        }
        (ConstraintSource::Grid { .. }, Some(s)) => grid::build_dr_constraints(s)?,
        (ConstraintSource::Grid { .. }, None) => unreachable!("grid case parsed above"),
    };
    Ok(Setup { instance: LotteryInstance::new(profile), scenario, constraints })
}

fn design_problem(cfg: &ScenarioConfig, s: &Setup) -> Result<DesignProblem> {
    let mut p = DesignProblem::new(s.instance.clone(), s.constraints.clone(), cfg.alpha)?;
    if let Some(r_min) = cfg.r_min {
        p = p.with_r_min(r_min)?;
    }
    if let Some(enc) = cfg.individual_rationality {
        p = p.with_individual_rationality(enc);
    }
    Ok(p)
}

fn perturbation_or_zero(c: &Option<Vec<f64>>, n: usize) -> Vec<f64> {
    c.clone().unwrap_or_else(|| vec![0.0; n])
}

fn run_equilibrium(cfg: &ScenarioConfig, report: &mut Report) -> Result<Vec<Table>> {
    let s = setup(cfg)?;
    let inst = &s.instance;
    let point = cfg.point.as_ref().ok_or_else(|| Error::Config("equilibrium needs a [point] table".into()))?;
    let d = DesignPoint::new(point.reward, perturbation_or_zero(&point.perturbation, inst.players()))?;
    let eq = inst.solve_equilibrium(&d)?;
    let props = analysis::check_properties(inst, &d, &eq)?;
    let (gain, who) = inst.max_deviation_gain(&d, &eq.investments)?;
    let tol = &cfg.tolerances;

    report.scalar("reward", d.reward());
    report.scalar("perturbation_sum", d.perturbation_sum());
    report.scalar("g_star", inst.profile().socially_optimal_good()?);
    report.scalar("public_good", eq.public_good);
    report.scalar("total_investment", eq.total_investment());
    report.scalar("active_players", eq.active_set.len() as f64);
    report.scalar("max_foc_violation", eq.max_foc_violation);
    report.scalar("max_deviation_gain", gain);
    report.scalar("poa", analysis::poa_at(inst.profile(), eq.public_good)?);
    report.scalar("reward_threshold", analysis::reward_threshold(inst.profile(), d.perturbation())?);
    report.check(Check::at_most("foc_residual", eq.max_foc_violation, tol.foc));
    report.check(
        Check::at_most("best_response_gain", gain, tol.best_response).with_detail(format!("player {}", who + 1)),
    );
    if !eq.cap_exceeded.is_empty() {
        report.check(Check::flag("wealth_caps", true, format!("caps exceeded by players {:?}", eq.cap_exceeded)));
    }
    report.properties = props.items;

    let mut t = Table::new("equilibrium.csv", &["player", "perturbation", "investment", "payoff"]);
    for (i, label) in s.player_labels().into_iter().enumerate() {
        let u = inst.payoff(&d, &eq.investments, i)?;
        t.push(vec![label, num(d.perturbation()[i]), num(eq.investments[i]), num(u)]);
    }
    Ok(vec![t])
}

struct SweepPoint {
    reward: f64,
    public_good: f64,
    poa: Extended,
    bounds: analysis::PoaBounds,
    properties: PropertyReport,
}

fn analyze_point(inst: &LotteryInstance, reward: f64, c: &[f64]) -> Result<SweepPoint> {
    let d = DesignPoint::new(reward, c.to_vec())?;
    let eq = inst.solve_equilibrium(&d)?;
    Ok(SweepPoint {
        reward,
        public_good: eq.public_good,
        poa: analysis::poa_at(inst.profile(), eq.public_good)?,
        bounds: analysis::poa_bounds(inst.profile(), &d)?,
        properties: analysis::check_properties(inst, &d, &eq)?,
    })
}

fn run_analyze(cfg: &ScenarioConfig, report: &mut Report) -> Result<Vec<Table>> {
    let s = setup(cfg)?;
    let inst = &s.instance;
    let n = inst.players();
    let (mut rewards, c) = match (&cfg.sweep, &cfg.point) {
        (Some(sw), _) => (sw.rewards.clone(), perturbation_or_zero(&sw.perturbation, n)),
        (None, Some(pt)) => (vec![pt.reward], perturbation_or_zero(&pt.perturbation, n)),
        (None, None) => return Err(Error::Config("analyze needs a [sweep] or [point] table".into())),
    };
    rewards.sort_by(f64::total_cmp);
    rewards.dedup();
    let points = par::map(&rewards, |&r| analyze_point(inst, r, &c)).into_iter().collect::<Result<Vec<_>>>()?;

    report.scalar("g_star", inst.profile().socially_optimal_good()?);
    report.scalar("perturbation_sum", c.iter().sum::<f64>());
    report.scalar("reward_threshold", analysis::reward_threshold(inst.profile(), &c)?);
    report.scalar("points", points.len() as f64);
    let mut t =
        Table::new("sweep.csv", &["reward", "public_good", "poa", "poa_lower", "poa_upper", "g_lower", "g_upper"]);
    for p in &points {
        t.push(vec![
            num(p.reward),
            num(p.public_good),
            ext(p.poa),
            ext(p.bounds.poa_lower),
            ext(p.bounds.poa_upper),
            num(p.bounds.g_lower),
            num(p.bounds.g_upper),
        ]);
        for o in &p.properties.items {
            let mut o = o.clone();
            o.property = format!("{}@R={}", o.property, p.reward);
            report.properties.push(o);
        }
    }
    Ok(vec![t])
}

/// Solves and verifies the design; returns the problem and the verified solution if optimal.
fn design_core(cfg: &ScenarioConfig, s: &Setup, report: &mut Report) -> Result<(DesignProblem, DesignSolution, bool)> {
    let p = design_problem(cfg, s)?;
    let sol = design::solve_design(&p)?;
    report.scalar("g_star", p.g_star());
    report.scalar("alpha", p.alpha());
    report.scalar("r_min", p.r_min());
    report.design = Some(sol.clone());
    if sol.status != LpStatus::Optimal {
        report.check(Check::flag("lp_optimal", false, format!("LP status {:?}", sol.status)));
        return Ok((p, sol, false));
    }
    let point = sol.point.as_ref().expect("optimal solution has a point");
    report.check(Check::flag("lp_optimal", true, ""));
    report.scalar("reward", point.reward());
    report.scalar("perturbation_sum", point.perturbation_sum());
    report.scalar("objective", sol.objective.unwrap_or(f64::NAN));
    report.scalar("total_investment", sol.total_investment());
    match design::verify_design(&p, &sol) {
        Ok(v) => {
            report.scalar("aggregate_payoff", v.aggregate_payoff);
            report.scalar("optimal_payoff", v.optimal_payoff);
            report.scalar("equilibrium_public_good", v.public_good);
            report.check(
                Check::at_most("verify_design", v.max_prediction_error, 1e-6)
                    .with_detail("equilibrium reproduces the design"),
            );
            Ok((p, sol, true))
        }
        Err(Error::ExactnessViolation(msg)) => {
            report.check(Check::flag("verify_design", false, msg));
            Ok((p, sol, false))
        }
        Err(e) => Err(e),
    }
}

fn investment_table(s: &Setup, sol: &DesignSolution) -> Table {
    let header: &[&'static str] =
        if s.scenario.is_some() { &["bus", "c_star", "s_star"] } else { &["player", "c_star", "s_star"] };
    let file = if s.scenario.is_some() { "investments.csv" } else { "design.csv" };
    let mut t = Table::new(file, header);
    debug_assert_eq!(header[0], s.player_column());
    if let Some(point) = &sol.point {
        let fmt = if s.scenario.is_some() { money } else { num };
        for ((label, c), sv) in s.player_labels().into_iter().zip(point.perturbation()).zip(&sol.predicted_investments)
        {
            t.push(vec![label, fmt(*c), fmt(*sv)]);
        }
    }
    t
}

fn run_design(cfg: &ScenarioConfig, report: &mut Report) -> Result<Vec<Table>> {
    let s = setup(cfg)?;
    let (_, sol, _) = design_core(cfg, &s, report)?;
    if let Some(sc) = &s.scenario {
        report.scenario = Some(sc.summary());
    }
    Ok(vec![investment_table(&s, &sol)])
}

fn run_casestudy(cfg: &ScenarioConfig, report: &mut Report) -> Result<Vec<Table>> {
    let s = setup(cfg)?;
    let sc = s.scenario.clone().ok_or_else(|| Error::Config("casestudy needs grid constraints".into()))?;
    report.scenario = Some(sc.summary());
    let (p, sol, _) = design_core(cfg, &s, report)?;
    let mut demand = Table::new("demand.csv", &["bus", "demand", "adjusted"]);
    let mut lines = Table::new("line_utilization.csv", &["line", "flow", "limit", "utilization_pct"]);
    report.scalar("total_load", sc.total_load());
    report.scalar("total_generation", sc.total_generation());
    if sol.status == LpStatus::Optimal {
        let shifts = &sol.predicted_investments;
        for ((bus, l), sv) in sc.load_buses.iter().zip(&sc.load).zip(shifts) {
            demand.push(vec![bus.to_string(), money(*l), money(l - sv)]);
        }
        let flows = sc.line_flows(shifts)?;
        let mut max_util: f64 = 0.0;
        for (k, (f, lim)) in flows.iter().zip(&sc.flow_limits).enumerate() {
            let util = lim.map_or(0.0, |m| 100.0 * f.abs() / m);
            max_util = max_util.max(util);
            lines.push(vec![(k + 1).to_string(), money(*f), lim.map_or("inf".into(), money), format!("{util:.6}")]);
        }
        let balance: f64 = sc.load.iter().zip(shifts).map(|(l, sv)| l - sv).sum();
        report.scalar("generation_balance", balance);
        report.scalar("max_line_utilization_pct", max_util);
        let point = sol.point.as_ref().expect("optimal solution has a point");
        let violation = p.all_constraints().max_violation(shifts, point.reward());
        report.check(Check::at_most("constraint_rows", violation, 1e-6));
        report.check(Check::at_most("line_utilization_pct", max_util, 100.0 + cfg.tolerances.line_utilization_pct));
    }
    Ok(vec![investment_table(&s, &sol), demand, lines])
}

/// Folds per-point property reports into one outcome per property.
pub fn aggregate_properties<'a>(reports: impl IntoIterator<Item = &'a PropertyReport>) -> Vec<PropertyOutcome> {
    let mut acc: BTreeMap<String, (bool, Option<f64>, usize, usize)> = BTreeMap::new();
    for rep in reports {
        for o in &rep.items {
            let e = acc.entry(o.property.clone()).or_insert((true, None, 0, 0));
            e.0 &= o.holds;
            if let Some(m) = o.margin {
                e.1 = Some(e.1.map_or(m, |x: f64| x.min(m)));
                e.2 += 1;
            } else {
                e.3 += 1;
            }
        }
    }
    acc.into_iter()
        .map(|(property, (holds, margin, checked, skipped))| PropertyOutcome {
            property,
            holds,
            margin,
            skipped_reason: (checked == 0).then(|| format!("skipped at all {skipped} points")),
        })
        .collect()
}

struct CorpusPoint {
    foc: f64,
    gain: f64,
    properties: PropertyReport,
}

fn selftest_point(inst: &LotteryInstance, d: &DesignPoint) -> Result<CorpusPoint> {
    let eq = inst.solve_equilibrium(d)?;
    let (gain, _) = inst.max_deviation_gain(d, &eq.investments)?;
    Ok(CorpusPoint { foc: eq.max_foc_violation, gain, properties: analysis::check_properties(inst, d, &eq)? })
}

fn run_selftest(cfg: &ScenarioConfig, seed: u64, report: &mut Report) -> Result<Vec<Table>> {
    let tol = &cfg.tolerances;
    let i2 = LotteryInstance::new(BenefitProfile::scaled_log(&[1.0, 1.0])?);
    let ln2 = 2f64.ln();

    // Two-player golden values.
    report.check(Check::near("i2_g_star", i2.profile().socially_optimal_good()?, 1.0, 1e-12));
    let d = DesignPoint::new(1.0, vec![0.0, 0.0])?;
    report.check(Check::near(
        "i2_payoff_example",
        i2.payoff(&d, &[1.0, 0.5], 0)?,
        2.0 / 3.0 + 0.5f64.ln_1p() - 1.0,
        1e-12,
    ));
    let eq = i2.solve_equilibrium(&d)?;
    report.check(Check::near("i2_equilibrium_good", eq.public_good, 0.5, 1e-9));
    report.check(Check::near("i2_poa_r1", analysis::poa_at(i2.profile(), eq.public_good)?.to_f64(), 1.2425, 1e-3));
    let sens = i2.sensitivities(&d, &eq)?;
    report.check(Check::near("i2_dg_dr", sens.d_good_d_reward, 1.0 / 6.0, 1e-9));
    report.check(Check::near("i2_dg_dc", sens.d_good_d_perturbation[0], 1.0 / 3.0, 1e-9));
    report.check(Check::near("i2_reward_threshold", analysis::reward_threshold(i2.profile(), &[0.0, 0.0])?, 1.0, 1e-9));
    let far = i2.solve_equilibrium(&DesignPoint::new(1e6, vec![0.0, 0.0])?)?;
    report.check(Check::near("i2_poa_r1e6", analysis::poa_at(i2.profile(), far.public_good)?.to_f64(), 1.0, 1e-3));
    let mut cs = ConstraintSet::new(2);
    cs.add(vec![-1.0, 0.0], 0.0, -2.0, "s1_min")?;
    let p = DesignProblem::new(i2.clone(), cs, 1.0)?;
    let sol = design::solve_design(&p)?;
    report.check(Check::near("i2_design_objective", sol.objective.unwrap_or(f64::NAN), 3.0, 1e-9));
    let ir =
        DesignProblem::new(i2.clone(), ConstraintSet::new(2), 1.0)?.with_individual_rationality(Default::default());
    let ok = design::verify_design(&ir, &DesignSolution::from_point(&ir, DesignPoint::new(1.0, vec![0.5, 0.5])?))?;
    report.check(Check::near("i2_ir_payoff", ok.aggregate_payoff, 2.0 * (ln2 - 0.5), 1e-9));

    // Case-study golden numbers.
    let case = ScenarioConfig {
        benefit: BenefitSpec { bus_offset: Some(100.0), ..BenefitSpec::default() },
        constraints: ConstraintSource::Grid { case: "builtin:case30".into(), scale: 1.3, rate: 0.1, hours: 1.0 },
        ..ScenarioConfig::default()
    };
    let mut sub = Report::new(Pipeline::Casestudy, seed, tol.clone());
    run_casestudy(&case, &mut sub)?;
    sub.finalize();
    let get = |k: &str| sub.scalars.get(k).map_or(f64::NAN, |v| v.to_f64());
    report.check(Check::flag("case30_verification", sub.passed, sub.failures().join(", ")));
    report.check(Check::near("case30_g_star", get("g_star"), 2317.0, 0.5));
    report.check(Check::near("case30_reward", get("reward"), 3358.0, 0.005 * 3358.0));
    report.check(Check::near("case30_total_investment", get("total_investment"), 5675.0, 0.005 * 5675.0));
    report.check(Check::near("case30_aggregate_payoff", get("aggregate_payoff"), 15644.0, 0.001 * 15644.0));
    report.check(Check::near("case30_generation_balance", get("generation_balance"), 18921.0, 0.5));

    // Reformulation exactness on a few planted problems.
    let mut rng = corpus::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let pp = corpus::random_design_problem(&mut rng, 2..=3, 1.0)?;
        let lp = design::solve_design(&pp.problem)?;
        let verified = design::verify_design(&pp.problem, &lp).is_ok();
        let grid = BruteForceGrid::new(pp.planted.reward() + 1.0, pp.problem.g_star() / 160.0);
        let o = design::brute_force_bilevel(&pp.problem, &grid)?;
        let gap = (o.solution.objective.unwrap_or(f64::INFINITY) - lp.objective.unwrap_or(f64::NAN)).abs();
        let allowed = 2.0 * o.resolution * (1.0 + pp.problem.alpha());
        worst = worst.max(if verified { gap / allowed } else { f64::INFINITY });
    }
    report.check(
        Check::at_most("reformulation_exactness", worst, 1.0)
            .with_detail("largest |LP − oracle| / (2·resolution·(1+α))"),
    );

    // Property suite on the random corpus.
    let mut pairs = corpus::sample(seed, cfg.selftest.corpus_size, &corpus::CorpusSpec::default())?;
    let on_optimum = corpus::CorpusSpec { perturbation_fraction: (1.0, 1.0), ..corpus::CorpusSpec::default() };
    pairs.extend(corpus::sample(seed.wrapping_add(1), cfg.selftest.corpus_size / 4, &on_optimum)?);
    let points = par::map(&pairs, |(inst, d)| selftest_point(inst, d)).into_iter().collect::<Result<Vec<_>>>()?;
    let worst_foc = points.iter().map(|p| p.foc).fold(0.0, f64::max);
    let worst_gain = points.iter().map(|p| p.gain).fold(f64::NEG_INFINITY, f64::max);
    let deviators = points.iter().filter(|p| p.gain > tol.best_response).count();
    report.check(Check::at_most("corpus_foc_residual", worst_foc, tol.foc));
    report.check(
        Check::at_most("corpus_best_response_gain", worst_gain, tol.best_response)
            .with_detail(format!("{deviators} of {} points admit a profitable deviation", points.len())),
    );
    report.properties = aggregate_properties(points.iter().map(|p| &p.properties));
    report.scalar("corpus_size", points.len() as f64);
    report.scalar("corpus_profitable_deviations", deviators as f64);

    let mut t = Table::new("selftest.csv", &["check", "passed", "expected", "actual", "tolerance"]);
    for c in &report.checks {
        let opt = |v: Option<f64>| v.map_or(String::new(), num);
        t.push(vec![c.name.clone(), c.passed.to_string(), opt(c.expected), opt(c.actual), opt(c.tolerance)]);
    }
    Ok(vec![t])
}
