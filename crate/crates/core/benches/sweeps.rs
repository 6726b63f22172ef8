use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use perturbed_lottery::corpus::{self, CorpusSpec};
use perturbed_lottery::design::{self, BruteForceGrid};
use perturbed_lottery::{analysis, par, DesignPoint, LotteryInstance};

fn analyze(inst: &LotteryInstance, r: f64, c: &[f64]) -> f64 {
    let d = DesignPoint::new(r, c.to_vec()).unwrap();
    let eq = inst.solve_equilibrium(&d).unwrap();
    let b = analysis::poa_bounds(inst.profile(), &d).unwrap();
    eq.public_good + b.g_lower
}

fn reward_sweep(c: &mut Criterion) {
    let (inst, d) = corpus::sample(1, 1, &CorpusSpec { players: 6..=6, ..CorpusSpec::default() }).unwrap().remove(0);
    let rewards: Vec<f64> = (0..2000).map(|k| d.reward() + 0.05 * k as f64).collect();
    let mut g = c.benchmark_group("reward_sweep");
    g.bench_function("parallel", |b| b.iter(|| par::map(&rewards, |&r| analyze(&inst, r, d.perturbation()))));
    g.bench_function("sequential", |b| b.iter(|| par::map_seq(&rewards, |&r| analyze(&inst, r, d.perturbation()))));
    g.finish();
}

fn corpus_properties(c: &mut Criterion) {
    let pairs = corpus::sample(2, 200, &CorpusSpec::default()).unwrap();
    let check = |(inst, d): &(LotteryInstance, DesignPoint)| {
        let eq = inst.solve_equilibrium(d).unwrap();
        analysis::check_properties(inst, d, &eq).unwrap().all_hold()
    };
    let mut g = c.benchmark_group("corpus_properties");
    g.bench_function("parallel", |b| b.iter(|| par::map(&pairs, check)));
    g.bench_function("sequential", |b| b.iter(|| par::map_seq(&pairs, check)));
    g.finish();
}

fn bilevel_oracle(c: &mut Criterion) {
    let pp = corpus::random_design_problem(&mut corpus::rng(3), 3..=3, 1.0).unwrap();
    let grid = BruteForceGrid::new(pp.planted.reward() + 1.0, pp.problem.g_star() / 160.0);
    let mut g = c.benchmark_group("bilevel_oracle");
    g.sample_size(10);
    for workers in [1, 4] {
        g.bench_with_input(BenchmarkId::new("workers", workers), &workers, |b, &w| {
            b.iter(|| par::with_workers(Some(w), || design::brute_force_bilevel(&pp.problem, &grid).unwrap()).unwrap())
        });
    }
    g.bench_function("lp", |b| b.iter(|| design::solve_design(&pp.problem).unwrap()));
    g.finish();
}

criterion_group!(benches, reward_sweep, corpus_properties, bilevel_oracle);
criterion_main!(benches);
