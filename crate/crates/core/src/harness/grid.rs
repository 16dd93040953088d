use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::rng::{child_rng, StreamPurpose};
use super::run::{run_adaptive_loop_with, RunOptions, RunTrace};
use crate::error::Result;
use crate::simplex::{sample_dirichlet, DirichletParams, ProbVector};

/// Draws the ground truth of run `run` of configuration `config_index`.
///
/// It depends only on the seed, indices, `K` and `rho`, so configurations
/// that differ elsewhere (mode, horizon, sampler) see the same truths.
pub fn ground_truth(config: &ExperimentConfig, config_index: usize, run: usize) -> Result<ProbVector> {
    let params = DirichletParams::symmetric(config.num_categories, config.rho)?;
    let mut rng = child_rng(config.seed, config_index as u64, run as u64, StreamPurpose::GroundTruth);
    Ok(sample_dirichlet(&params, &mut rng))
}

/// One replicate, on its own child streams.
pub fn run_replicate(config: &ExperimentConfig, config_index: usize, run: usize, options: RunOptions) -> Result<RunTrace> {
    let theta_star = ground_truth(config, config_index, run)?;
    let mut rng = child_rng(config.seed, config_index as u64, run as u64, StreamPurpose::Loop);
    run_adaptive_loop_with(config, &theta_star, &mut rng, options)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub result: std::result::Result<RunTrace, String>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub message: String,
}

/// Summary of the successful runs of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub config_index: usize,
    /// Run indices of the successful runs, aligned with the vectors below.
    pub runs: Vec<usize>,
    pub tv_errors: Vec<f64>,
    pub mean_subset_sizes: Vec<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Average of the per-run mean subset sizes.
    pub mean_subset_size: f64,
    pub failures: Vec<RunFailure>,
}

/// Quantile by linear interpolation between order statistics; `NaN` when
/// `values` is empty.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl AggregateResult {
    /// Folds outcomes in run order; failures are counted, not averaged in.
    pub fn from_outcomes(config_index: usize, outcomes: &[RunOutcome]) -> Self {
        let mut runs = Vec::new();
        let mut tv_errors = Vec::new();
        let mut mean_subset_sizes = Vec::new();
        let mut failures = Vec::new();
        for o in outcomes {
            match &o.result {
                Ok(trace) => {
                    runs.push(o.run);
                    tv_errors.push(trace.tv_error);
                    mean_subset_sizes.push(trace.mean_subset_size);
                }
                Err(message) => failures.push(RunFailure {
                    run: o.run,
                    message: message.clone(),
                }),
            }
        }
        let mean_subset_size = if mean_subset_sizes.is_empty() {
            f64::NAN
        } else {
            mean_subset_sizes.iter().sum::<f64>() / mean_subset_sizes.len() as f64
        };
        Self {
            config_index,
            median: quantile(&tv_errors, 0.5),
            q1: quantile(&tv_errors, 0.25),
            q3: quantile(&tv_errors, 0.75),
            runs,
            tv_errors,
            mean_subset_sizes,
            mean_subset_size,
            failures,
        }
    }
}

/// Runs every replicate of one configuration in parallel.
pub fn run_config(config: &ExperimentConfig, config_index: usize) -> Result<Vec<RunOutcome>> {
    config.validate()?;
    let outcomes: Vec<RunOutcome> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let start = Instant::now();
            let result = run_replicate(config, config_index, run, RunOptions::default()).map_err(|e| {
                warn!("config {config_index} run {run} failed: {e}");
                e.to_string()
            });
            RunOutcome {
                run,
                result,
                wall_time_secs: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    Ok(outcomes)
}

/// Runs and aggregates every configuration. All configurations are
/// validated before any run starts.
pub fn run_grid(configs: &[ExperimentConfig]) -> Result<Vec<AggregateResult>> {
    for c in configs {
        c.validate()?;
    }
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| Ok(AggregateResult::from_outcomes(i, &run_config(c, i)?)))
        .collect()
}
