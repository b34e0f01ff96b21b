//! Seeded trial batches and their CSV reports.

use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use rpg_core::meter::ClockKind;
use rpg_core::orchestrator::{plan_detailed, ExecMode, PlanError, PlanRun, PlannerConfig, PlannerKind, SubPlanner};

use crate::scenario::Scenario;

pub const DEFAULT_TIMEOUT_S: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Rpg,
    Uninformed,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Rpg => "rpg",
            Flavor::Uninformed => "uninformed",
        })
    }
}

impl FromStr for Flavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rpg" => Ok(Flavor::Rpg),
            "uninformed" => Ok(Flavor::Uninformed),
            other => Err(format!("unknown flavor {other:?} (expected rpg or uninformed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Success => "success",
            Outcome::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub scenario: String,
    pub flavor: Flavor,
    pub seed: u64,
    pub outcome: Outcome,
    /// Planner clock at the end of the run; the timeout for timed-out runs.
    pub wall_time_s: f64,
    pub segments_gait: usize,
    pub segments_mmp: usize,
    /// Root path length of the solution; `None` for timeouts.
    pub path_length_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOptions {
    pub flavor: Flavor,
    pub trials: usize,
    pub base_seed: u64,
    pub timeout_s: f64,
    /// Single-threaded planner on the deterministic work clock.
    pub sequential: bool,
    /// Trials run concurrently on this many threads.
    pub parallel_trials: usize,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            flavor: Flavor::Rpg,
            trials: 1,
            base_seed: 0,
            timeout_s: DEFAULT_TIMEOUT_S,
            sequential: true,
            parallel_trials: 1,
        }
    }
}

pub fn planner_config(opts: &TrialOptions, seed: u64) -> PlannerConfig {
    PlannerConfig {
        kind: match opts.flavor {
            Flavor::Rpg => PlannerKind::Rpg,
            Flavor::Uninformed => PlannerKind::Uninformed,
        },
        timeout_s: opts.timeout_s,
        seed,
        exec: if opts.sequential {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        },
        clock: if opts.sequential {
            ClockKind::Work
        } else {
            ClockKind::Wall
        },
        ..PlannerConfig::default()
    }
}

/// One trial, keeping the full run for rendering.
pub fn run_trial(scenario: &Scenario, opts: &TrialOptions, seed: u64) -> Result<(TrialReport, PlanRun), PlanError> {
    let run = plan_detailed(&scenario.problem(), &planner_config(opts, seed));
    let report = match &run.outcome {
        Ok(sol) => TrialReport {
            scenario: scenario.name.clone(),
            flavor: opts.flavor,
            seed,
            outcome: Outcome::Success,
            wall_time_s: sol.stats.elapsed_s,
            segments_gait: sol.count(SubPlanner::Gait),
            segments_mmp: sol.count(SubPlanner::Mmp),
            path_length_m: Some(sol.trajectory.path_length()),
        },
        Err(PlanError::Timeout(t)) => TrialReport {
            scenario: scenario.name.clone(),
            flavor: opts.flavor,
            seed,
            outcome: Outcome::Timeout,
            wall_time_s: *t,
            segments_gait: 0,
            segments_mmp: 0,
            path_length_m: None,
        },
        Err(e) => return Err(e.clone()),
    };
    Ok((report, run))
}

/// Runs seeds `base_seed .. base_seed + trials`.
pub fn run_trials(scenario: &Scenario, opts: &TrialOptions) -> Result<Vec<TrialReport>, PlanError> {
    assert!(opts.trials >= 1, "at least one trial");
    let seeds: Vec<u64> = (0..opts.trials as u64).map(|i| opts.base_seed + i).collect();
    let one = |seed: &u64| run_trial(scenario, opts, *seed).map(|(r, _)| r);
    if opts.parallel_trials <= 1 {
        return seeds.iter().map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallel_trials)
        .build()
        .expect("thread pool");
    pool.install(|| seeds.par_iter().map(one).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub success_rate: f64,
    pub mean_time_s: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std_time_s: f64,
    pub median_time_s: f64,
    pub mean_segments_gait: f64,
    pub mean_segments_mmp: f64,
    /// Mean over successful trials.
    pub mean_path_length_m: Option<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn summarize(reports: &[TrialReport]) -> Summary {
    let n = reports.len();
    let nf = n as f64;
    let times: Vec<f64> = reports.iter().map(|r| r.wall_time_s).collect();
    let mean = times.iter().sum::<f64>() / nf;
    let std = if n > 1 {
        (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    let successes = reports.iter().filter(|r| r.outcome == Outcome::Success).count();
    let paths: Vec<f64> = reports.iter().filter_map(|r| r.path_length_m).collect();
    Summary {
        trials: n,
        success_rate: successes as f64 / nf,
        mean_time_s: mean,
        std_time_s: std,
        median_time_s: median(&times),
        mean_segments_gait: reports.iter().map(|r| r.segments_gait as f64).sum::<f64>() / nf,
        mean_segments_mmp: reports.iter().map(|r| r.segments_mmp as f64).sum::<f64>() / nf,
        mean_path_length_m: (!paths.is_empty()).then(|| paths.iter().sum::<f64>() / paths.len() as f64),
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "scenario",
    "flavor",
    "seed",
    "outcome",
    "wall_time_s",
    "segments_gait",
    "segments_mmp",
    "path_length_m",
];

/// Writes one row per trial and a final summary row. In the summary row the
/// outcome column holds the success rate and the time column `mean (std)`.
pub fn write_csv<W: io::Write>(reports: &[TrialReport], out: W) -> csv::Result<()> {
    assert!(!reports.is_empty(), "no reports to write");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.scenario.clone(),
            r.flavor.to_string(),
            r.seed.to_string(),
            r.outcome.to_string(),
            r.wall_time_s.to_string(),
            r.segments_gait.to_string(),
            r.segments_mmp.to_string(),
            r.path_length_m.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    let s = summarize(reports);
    w.write_record([
        reports[0].scenario.clone(),
        reports[0].flavor.to_string(),
        "summary".to_string(),
        format!("{:.2}", s.success_rate),
        format!("{} ({})", s.mean_time_s, s.std_time_s),
        s.mean_segments_gait.to_string(),
        s.mean_segments_mmp.to_string(),
        s.mean_path_length_m.map(|p| p.to_string()).unwrap_or_default(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn csv_string(reports: &[TrialReport]) -> String {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn emit_csv(reports: &[TrialReport], path: &Path) -> csv::Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(reports, f)
}
