//! The online estimation loop, Monte Carlo replication over parameter
//! grids, and curve data for the honest-response utility.

mod config;
mod fig2;
mod grid;
mod rng;
mod run;

pub use config::{ExperimentConfig, SamplerChoice, SelectionMode};
pub use fig2::{best_row, geometric_theta, reproduce_fig2, srr_baseline, Fig2Row};
pub use grid::{
    ground_truth, quantile, run_config, run_grid, run_replicate, AggregateResult, RunFailure, RunOutcome,
};
pub use rng::{child_rng, StreamPurpose};
pub use run::{run_adaptive_loop, run_adaptive_loop_with, RunDiagnostics, RunOptions, RunTrace, StepRecord};
