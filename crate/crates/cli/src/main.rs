use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perturbed_lottery::harness::{run_scenario, Pipeline, RunOptions, ScenarioConfig, EXIT_CONFIG_ERROR};

#[derive(Parser)]
#[command(name = "lottery", version, about = "Perturbed lottery equilibria, efficiency analysis and optimal design")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Solve the equilibrium at one design point and check its properties.
    Equilibrium(Flags),
    /// Sweep rewards and report price-of-anarchy bounds.
    Analyze(Flags),
    /// Solve the design LP and verify it against the equilibrium solver.
    Design(Flags),
    /// Demand-response design on a grid case, with figure data.
    Casestudy(Flags),
    /// Golden numbers and the randomized property suite.
    Selftest(Flags),
}

#[derive(Args)]
struct Flags {
    /// Scenario file (TOML). Optional for selftest.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides LOTTERY_OUT_DIR and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and the self-test corpus.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (pipeline, flags) = match cli.verb {
        Verb::Equilibrium(f) => (Pipeline::Equilibrium, f),
        Verb::Analyze(f) => (Pipeline::Analyze, f),
        Verb::Design(f) => (Pipeline::Design, f),
        Verb::Casestudy(f) => (Pipeline::Casestudy, f),
        Verb::Selftest(f) => (Pipeline::Selftest, f),
    };
    let cfg = match &flags.config {
        Some(path) => ScenarioConfig::load(path),
        None if pipeline == Pipeline::Selftest => Ok(ScenarioConfig::default()),
        None => {
            eprintln!("error: --config is required for {}", pipeline.name());
            return ExitCode::from(EXIT_CONFIG_ERROR as u8);
        }
    };
    let opts = RunOptions { pipeline: Some(pipeline), out_dir: flags.out, workers: flags.workers, seed: flags.seed };
    let outcome = match cfg.and_then(|cfg| run_scenario(&cfg, &opts)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG_ERROR as u8);
        }
    };
    let report = &outcome.report;
    for c in &report.checks {
        println!("{:<34} {}", c.name, if c.passed { "ok" } else { "FAILED" });
    }
    let failed_props = report.properties.iter().filter(|p| !p.holds).count();
    if failed_props > 0 {
        println!("{failed_props} property checks failed");
    }
    println!(
        "{}: {} (artifacts in {})",
        pipeline.name(),
        if report.passed { "passed" } else { "verification failed" },
        outcome.out_dir.display()
    );
    ExitCode::from(outcome.exit_code() as u8)
}
