//! Command-line front end: argument parsing and dispatch to the library.

pub mod args;
pub mod output;

use std::fs;
use std::path::Path;

use adobest_core::harness::{
    best_row, reproduce_fig2, run_config, run_replicate, AggregateResult, ExperimentConfig, RunOptions, RunOutcome,
    SamplerChoice, SelectionMode,
};
use adobest_core::inference::{SgldConfig, StepSchedule};
use adobest_core::mechanism::{build_transition_matrix, verify_ldp, MechanismSpec, SubsetSpec};
use adobest_core::validation::run_validation_suite;
use anyhow::{bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

pub use args::{Cli, Command};
use args::{ExperimentArgs, Fig2Args, GridArgs, InspectArgs, ModeArg, SamplerArg, SimulateArgs, ValidateArgs};
use output::{fmt_f64, write_atomic, Csv};

/// Version of the CSV and summary JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;

/// Exit status for a validation run with a failing check.
pub const EXIT_VALIDATION_FAILED: i32 = 2;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "ADOBEST_THREADS";

/// Runs a parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Grid(a) => grid(&a),
        Command::InspectMechanism(a) => inspect(&a),
        Command::Fig2(a) => fig2(&a),
        Command::Validate(a) => validate(&a),
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .with_context(|| format!("{THREADS_ENV} must be a whole number, got `{v}`"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            bail!("thread count must be at least 1");
        }
        // a pool may already exist when embedded in tests; keep it
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            info!("thread pool already initialized; ignoring thread count {n}");
        }
    }
    Ok(())
}

/// Builds the experiment described by the flags.
pub fn experiment_from_args(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let (Some(num_categories), Some(epsilon), Some(rho)) = (a.num_categories, a.epsilon, a.rho) else {
        bail!("--k, --epsilon and --rho are required without --config");
    };
    let mode = match a.mode {
        ModeArg::Adaptive => SelectionMode::Adaptive { utility: a.utility },
        ModeArg::SemiAdaptive => SelectionMode::SemiAdaptive { alpha: a.alpha },
        ModeArg::NonAdaptive => SelectionMode::NonAdaptive,
    };
    let sampler = match a.sampler {
        SamplerArg::Sgld => SamplerChoice::Sgld(SgldConfig {
            updates_per_step: a.updates,
            minibatch: a.minibatch,
            step_size: StepSchedule::InverseTime { scale: a.step_scale },
            noise_scale: a.noise.into(),
        }),
        SamplerArg::Gibbs => SamplerChoice::Gibbs { sweeps: a.gibbs_sweeps },
    };
    let config = ExperimentConfig {
        num_categories,
        epsilon,
        kappa: a.kappa,
        rho,
        steps: a.steps,
        mode,
        sampler,
        runs: a.runs,
        seed: a.seed,
        final_mcmc_iters: a.final_iters,
        final_burnin: a.final_burnin,
        prior_shape: a.prior_shape,
        audit_fraction: a.audit_fraction,
    };
    config.validate()?;
    Ok(config)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

fn runs_csv(config_index: usize, outcomes: &[RunOutcome], wall_time: bool) -> String {
    let mut csv = Csv::new(["config_id", "run", "status", "tv_error", "mean_subset_size", "wall_time_secs"]);
    for o in outcomes {
        let time = if wall_time { fmt_f64(o.wall_time_secs) } else { String::new() };
        match &o.result {
            Ok(t) => csv.row([
                config_index.to_string(),
                o.run.to_string(),
                "ok".into(),
                fmt_f64(t.tv_error),
                fmt_f64(t.mean_subset_size),
                time,
            ]),
            Err(_) => csv.row([
                config_index.to_string(),
                o.run.to_string(),
                "failed".into(),
                String::new(),
                String::new(),
                time,
            ]),
        }
    }
    csv.into_string()
}

/// Summary JSON of one configuration.
#[derive(Debug, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub schema_version: u32,
    pub config_index: usize,
    pub config: ExperimentConfig,
    pub successful_runs: usize,
    pub failed_runs: usize,
    pub median_tv_error: f64,
    pub q1_tv_error: f64,
    pub q3_tv_error: f64,
    pub mean_subset_size: f64,
    pub failures: Vec<adobest_core::harness::RunFailure>,
}

fn summarize(config: &ExperimentConfig, agg: AggregateResult) -> ConfigSummary {
    ConfigSummary {
        schema_version: SCHEMA_VERSION,
        config_index: agg.config_index,
        config: config.clone(),
        successful_runs: agg.tv_errors.len(),
        failed_runs: agg.failures.len(),
        median_tv_error: agg.median,
        q1_tv_error: agg.q1,
        q3_tv_error: agg.q3,
        mean_subset_size: agg.mean_subset_size,
        failures: agg.failures,
    }
}

fn summary_line(s: &ConfigSummary) -> String {
    format!(
        "config {}: median TV error {:.6} (q1 {:.6}, q3 {:.6}), mean subset size {:.3}, {} runs ok, {} failed",
        s.config_index,
        s.median_tv_error,
        s.q1_tv_error,
        s.q3_tv_error,
        s.mean_subset_size,
        s.successful_runs,
        s.failed_runs
    )
}

fn simulate(a: &SimulateArgs) -> Result<i32> {
    let config = match &a.config {
        Some(path) => {
            let c: ExperimentConfig = read_json(path)?;
            c.validate().with_context(|| format!("invalid configuration in {}", path.display()))?;
            c
        }
        None => experiment_from_args(&a.experiment)?,
    };
    if a.dump_config {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(0);
    }
    let outcomes = run_config(&config, 0)?;
    if let Some(path) = &a.out {
        write_atomic(path, runs_csv(0, &outcomes, !a.no_wall_time).as_bytes())?;
    }
    if a.utility_log.is_some() || a.chain_trace.is_some() {
        write_run_diagnostics(&config, a)?;
    }
    let summary = summarize(&config, AggregateResult::from_outcomes(0, &outcomes));
    if let Some(path) = &a.summary {
        write_atomic(path, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    }
    println!("{}", summary_line(&summary));
    Ok(0)
}

/// Replays run 0 with recording on; the replay is bit-identical to the
/// original because each run owns its random streams.
fn write_run_diagnostics(config: &ExperimentConfig, a: &SimulateArgs) -> Result<()> {
    let trace = run_replicate(
        config,
        0,
        0,
        RunOptions {
            audit_all: false,
            record: true,
        },
    )?;
    let diag = trace.diagnostics.expect("recording was requested");
    let kt = config.num_categories;
    if let Some(path) = &a.utility_log {
        let mut header = vec!["step".to_string(), "response".into(), "subset_size".into()];
        header.extend((0..kt).map(|k| format!("utility_k{k}")));
        let mut csv = Csv::new(header);
        for s in &diag.steps {
            let mut row = vec![s.step.to_string(), s.response.to_string(), s.subset.len().to_string()];
            match &s.utility_values {
                Some(v) => row.extend(v.iter().map(|u| fmt_f64(*u))),
                None => row.extend((0..kt).map(|_| String::new())),
            }
            csv.row(row);
        }
        write_atomic(path, csv.into_string().as_bytes())?;
    }
    if let Some(path) = &a.chain_trace {
        let mut header = vec!["iterate".to_string()];
        header.extend((0..kt).map(|k| format!("theta_{k}")));
        let mut csv = Csv::new(header);
        for (i, theta) in diag.final_chain.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(theta.as_slice().iter().map(|v| fmt_f64(*v)));
            csv.row(row);
        }
        write_atomic(path, csv.into_string().as_bytes())?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridFile {
    List(Vec<ExperimentConfig>),
    Wrapped { configs: Vec<ExperimentConfig> },
}

fn grid(a: &GridArgs) -> Result<i32> {
    let configs = match read_json::<GridFile>(&a.config)? {
        GridFile::List(c) | GridFile::Wrapped { configs: c } => c,
    };
    if configs.is_empty() {
        bail!("{} contains no configurations", a.config.display());
    }
    for (i, c) in configs.iter().enumerate() {
        c.validate().with_context(|| format!("configuration {i} in {}", a.config.display()))?;
    }
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let mut summaries = Vec::with_capacity(configs.len());
    for (i, config) in configs.iter().enumerate() {
        let outcomes = run_config(config, i)?;
        let path = a.out.join(format!("config_{i}.csv"));
        write_atomic(&path, runs_csv(i, &outcomes, !a.no_wall_time).as_bytes())?;
        let s = summarize(config, AggregateResult::from_outcomes(i, &outcomes));
        println!("{}", summary_line(&s));
        summaries.push(s);
    }
    write_atomic(&a.out.join("summary.json"), serde_json::to_string_pretty(&summaries)?.as_bytes())?;
    Ok(0)
}

fn inspect(a: &InspectArgs) -> Result<i32> {
    let kt = a.num_categories;
    let members = match &a.subset {
        Some(m) => m.clone(),
        None => {
            if a.subset_size >= kt {
                bail!("--subset-size must be below --k ({kt}), got {}", a.subset_size);
            }
            (0..a.subset_size).collect()
        }
    };
    let spec = MechanismSpec::new(SubsetSpec::new(members, kt)?, a.epsilon, a.kappa)?;
    let tm = build_transition_matrix(&spec);
    let report = verify_ldp(&tm, a.epsilon);

    let mut header = vec!["y".to_string()];
    header.extend((0..kt).map(|x| format!("x{x}")));
    let mut csv = Csv::new(header);
    for y in 0..kt {
        let mut row = vec![y.to_string()];
        row.extend((0..kt).map(|x| fmt_f64(tm.get(y, x))));
        csv.row(row);
    }
    let csv = csv.into_string();
    match &a.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    if let Some(path) = &a.report {
        write_atomic(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    let b = spec.budget();
    let (x, xp, y) = report.worst;
    println!(
        "{}: max log-ratio {} vs epsilon {} (eps1 {}, eps2 {}; worst x={x}, x'={xp}, y={y})",
        if report.certified { "certified" } else { "NOT certified" },
        fmt_f64(report.max_log_ratio),
        fmt_f64(a.epsilon),
        fmt_f64(b.epsilon1()),
        fmt_f64(b.epsilon2()),
    );
    Ok(0)
}

fn fig2(a: &Fig2Args) -> Result<i32> {
    let rows = reproduce_fig2(a.num_categories, a.epsilon, a.kappa, &a.ratios)?;
    let mut csv = Csv::new(["ratio", "k", "u6", "srr_baseline"]);
    for r in &rows {
        csv.row([fmt_f64(r.ratio), r.k.to_string(), fmt_f64(r.u6), fmt_f64(r.srr_baseline)]);
    }
    let csv = csv.into_string();
    match &a.out {
        Some(path) => {
            write_atomic(path, csv.as_bytes())?;
            let best: Vec<String> = a
                .ratios
                .iter()
                .filter_map(|&r| best_row(&rows, r).map(|b| format!("{r}: k={}", b.k)))
                .collect();
            println!("wrote {} rows to {}; best subset size per ratio {}", rows.len(), path.display(), best.join(", "));
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

fn validate(a: &ValidateArgs) -> Result<i32> {
    let report = run_validation_suite(a.seed);
    for c in &report.checks {
        println!(
            "{} {}: {} cases, worst {} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            fmt_f64(c.worst),
            c.detail
        );
    }
    if let Some(path) = &a.report {
        write_atomic(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    if report.passed() {
        println!("validation passed");
        Ok(0)
    } else {
        println!("validation FAILED");
        Ok(EXIT_VALIDATION_FAILED)
    }
}
