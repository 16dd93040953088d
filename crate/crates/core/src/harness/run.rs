use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SamplerChoice, SelectionMode};
use crate::error::{Error, Result};
use crate::inference::{gibbs_sweep, phi_to_theta, sgld_sample, sgld_update, GammaState, GibbsState, History};
use crate::mechanism::{build_transition_matrix, randomize, verify_ldp, MechanismSpec, SubsetSpec};
use crate::simplex::{sample_categorical, tv_distance, DirichletParams, ProbVector};
use crate::utility::{select_subset, select_subset_semi_adaptive, SubsetChoice};

/// Extra bookkeeping for tests and diagnostics; off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Certify every mechanism instead of the configured fraction.
    pub audit_all: bool,
    /// Keep per-step records and the final chain in the trace.
    pub record: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub truth: usize,
    pub response: usize,
    pub subset: Vec<usize>,
    /// Utility of every prefix length, when the mode computes them.
    pub utility_values: Option<Vec<f64>>,
    /// Sampler state digest before and after this step's update.
    pub fingerprint_in: u64,
    pub fingerprint_out: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunDiagnostics {
    pub steps: Vec<StepRecord>,
    /// `theta` iterates of the final averaging chain, burn-in included.
    pub final_chain: Vec<ProbVector>,
    pub audits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub subset_sizes: Vec<usize>,
    pub final_estimate: ProbVector,
    pub ground_truth: ProbVector,
    pub tv_error: f64,
    pub mean_subset_size: f64,
    pub diagnostics: Option<RunDiagnostics>,
}

impl RunTrace {
    /// The error metric recomputed from the stored estimate and truth.
    pub fn recompute_tv_error(&self) -> Result<f64> {
        tv_distance(&self.final_estimate, &self.ground_truth)
    }
}

enum Chain {
    Sgld(GammaState),
    Gibbs(GibbsState),
}

impl Chain {
    fn fingerprint(&self) -> u64 {
        match self {
            Chain::Sgld(s) => s.fingerprint(),
            Chain::Gibbs(s) => s.fingerprint(),
        }
    }
}

fn choose_subset(config: &ExperimentConfig, theta: &ProbVector) -> Result<SubsetChoice> {
    match config.mode {
        SelectionMode::Adaptive { utility } => select_subset(theta, config.epsilon, config.kappa, utility),
        SelectionMode::SemiAdaptive { alpha } => select_subset_semi_adaptive(theta, alpha),
        SelectionMode::NonAdaptive => Ok(SubsetChoice {
            k_star: 0,
            subset: SubsetSpec::empty(config.num_categories),
            utility_values: None,
        }),
    }
}

/// Runs the online loop once against `theta_star`.
pub fn run_adaptive_loop<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    theta_star: &ProbVector,
    rng: &mut R,
) -> Result<RunTrace> {
    run_adaptive_loop_with(config, theta_star, rng, RunOptions::default())
}

pub fn run_adaptive_loop_with<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    theta_star: &ProbVector,
    rng: &mut R,
    options: RunOptions,
) -> Result<RunTrace> {
    config.validate()?;
    let kt = config.num_categories;
    if theta_star.len() != kt {
        return Err(Error::DimensionMismatch {
            expected: kt,
            actual: theta_star.len(),
        });
    }
    let prior = DirichletParams::symmetric(kt, config.prior_shape)?;
    let mut chain = match config.sampler {
        SamplerChoice::Sgld(_) => Chain::Sgld(GammaState::at_prior_mean(prior.clone())),
        SamplerChoice::Gibbs { .. } => Chain::Gibbs(GibbsState::new(prior.mean())),
    };
    let audit_stride = if options.audit_all { Some(1) } else { config.audit_stride() };
    let mut diagnostics = options.record.then(RunDiagnostics::default);

    let mut theta = prior.mean();
    let mut history = History::new(kt);
    let mut subset_sizes = Vec::with_capacity(config.steps);

    for t in 1..=config.steps {
        let choice = choose_subset(config, &theta)?;
        let spec = MechanismSpec::new(choice.subset, config.epsilon, config.kappa)?;
        if audit_stride.is_some_and(|s| (t - 1) % s == 0) {
            let report = verify_ldp(&build_transition_matrix(&spec), config.epsilon);
            if !report.certified {
                return Err(Error::PrivacyAudit {
                    step: t,
                    epsilon: config.epsilon,
                    max_log_ratio: report.max_log_ratio,
                });
            }
            if let Some(d) = diagnostics.as_mut() {
                d.audits += 1;
            }
        }
        let x = sample_categorical(theta_star, rng);
        let y = randomize(&spec, x, rng)?;
        subset_sizes.push(choice.k_star);
        let subset = spec.subset().members().to_vec();
        history.push(y, spec)?;

        let fingerprint_in = chain.fingerprint();
        chain = match (chain, &config.sampler) {
            (Chain::Sgld(state), SamplerChoice::Sgld(cfg)) => {
                let (state, next) = sgld_sample(&history, cfg, state, t, rng);
                theta = next;
                Chain::Sgld(state)
            }
            (Chain::Gibbs(mut state), SamplerChoice::Gibbs { sweeps }) => {
                for _ in 0..*sweeps {
                    state = gibbs_sweep(&state, &history, &prior, rng);
                }
                theta = state.theta().clone();
                Chain::Gibbs(state)
            }
            _ => unreachable!("chain kind follows the sampler choice"),
        };
        if let Some(d) = diagnostics.as_mut() {
            d.steps.push(StepRecord {
                step: t,
                truth: x,
                response: y,
                subset,
                utility_values: choice.utility_values,
                fingerprint_in,
                fingerprint_out: chain.fingerprint(),
            });
        }
    }

    // posterior mean from a longer chain at the final step size
    let kept = config.final_mcmc_iters - config.final_burnin;
    let mut mean = vec![0.0; kt];
    for i in 0..config.final_mcmc_iters {
        let iterate = match (&mut chain, &config.sampler) {
            (Chain::Sgld(state), SamplerChoice::Sgld(cfg)) => {
                *state = sgld_update(state, &history, cfg, config.steps, rng);
                phi_to_theta(state)
            }
            (Chain::Gibbs(state), SamplerChoice::Gibbs { .. }) => {
                *state = gibbs_sweep(state, &history, &prior, rng);
                state.theta().clone()
            }
            _ => unreachable!("chain kind follows the sampler choice"),
        };
        if i >= config.final_burnin {
            for (m, v) in mean.iter_mut().zip(iterate.as_slice()) {
                *m += v;
            }
        }
        if let Some(d) = diagnostics.as_mut() {
            d.final_chain.push(iterate);
        }
    }
    let final_estimate = ProbVector::new(mean.into_iter().map(|m| m / kept as f64).collect())?;
    let tv_error = tv_distance(&final_estimate, theta_star)?;
    let mean_subset_size = subset_sizes.iter().sum::<usize>() as f64 / subset_sizes.len() as f64;
    debug!("run finished: tv error {tv_error:.4}, mean subset size {mean_subset_size:.2}");
    Ok(RunTrace {
        subset_sizes,
        final_estimate,
        ground_truth: theta_star.clone(),
        tv_error,
        mean_subset_size,
        diagnostics,
    })
}
