use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rpg_bench::scenario::{load_scenario, resolve};
use rpg_bench::svg::{emit_svg, Layer};
use rpg_bench::trials::{emit_csv, run_trial, run_trials, summarize, Flavor, TrialOptions, DEFAULT_TIMEOUT_S};

/// Runs seeded planning trials on a scenario and reports timing statistics.
#[derive(Debug, Parser)]
#[command(name = "rpg-bench", version)]
struct Args {
    /// Scenario file, or the name of a bundled scenario (e.g. `limbo`).
    #[arg(long)]
    scenario: String,
    /// Planner flavor: rpg or uninformed.
    #[arg(long, default_value = "rpg")]
    flavor: Flavor,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Seed of the first trial; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-trial timeout in seconds (default: the scenario's, else 120).
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    emit_csv: Option<PathBuf>,
    /// Render the first trial's possibility graph, solution and samples.
    #[arg(long)]
    emit_svg: Option<PathBuf>,
    /// Single-threaded planner timed by the deterministic work clock.
    #[arg(long)]
    sequential: bool,
    /// Run this many trials concurrently.
    #[arg(long, default_value_t = 1)]
    parallel_trials: usize,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    if args.trials == 0 {
        return Err("--trials must be at least 1".into());
    }
    let scenario = load_scenario(&resolve(&args.scenario))?;
    let opts = TrialOptions {
        flavor: args.flavor,
        trials: args.trials,
        base_seed: args.seed,
        timeout_s: args.timeout.or(scenario.timeout_s).unwrap_or(DEFAULT_TIMEOUT_S),
        sequential: args.sequential,
        parallel_trials: args.parallel_trials.max(1),
    };
    if !(opts.timeout_s > 0.0) {
        return Err("--timeout must be positive".into());
    }

    let reports = run_trials(&scenario, &opts)?;
    for r in &reports {
        println!(
            "{} {} seed={} {} t={:.3}s gait={} mmp={}",
            r.scenario, r.flavor, r.seed, r.outcome, r.wall_time_s, r.segments_gait, r.segments_mmp
        );
    }
    let s = summarize(&reports);
    println!(
        "summary: success {:.2}, time mean {:.3}s (std {:.3}), median {:.3}s",
        s.success_rate, s.mean_time_s, s.std_time_s, s.median_time_s
    );

    if let Some(path) = &args.emit_csv {
        emit_csv(&reports, path)?;
    }
    if let Some(path) = &args.emit_svg {
        let (_, run) = run_trial(&scenario, &opts, opts.base_seed)?;
        let mut layers = vec![Layer::Graph(&run.graph), Layer::Trace(&run.traces)];
        if let Ok(sol) = &run.outcome {
            layers.push(Layer::Solution(&sol.trajectory));
        }
        emit_svg(&scenario.world, &scenario.bounds, &scenario.robot, &layers, path)?;
    }
    Ok(())
}
