use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::inference::SgldConfig;
use crate::utility::UtilityKind;

/// How the subset is chosen at each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SelectionMode {
    Adaptive { utility: UtilityKind },
    SemiAdaptive { alpha: f64 },
    /// Always the empty subset, i.e. plain SRR.
    NonAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerChoice {
    Sgld(SgldConfig),
    /// Full Gibbs sweeps per step.
    Gibbs { sweeps: usize },
}

fn default_prior_shape() -> f64 {
    1.0
}

fn default_audit_fraction() -> f64 {
    0.01
}

/// One cell of an experiment grid, replicated `runs` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_categories: usize,
    pub epsilon: f64,
    pub kappa: f64,
    /// Concentration of the symmetric Dirichlet the ground truth is drawn from.
    pub rho: f64,
    pub steps: usize,
    pub mode: SelectionMode,
    pub sampler: SamplerChoice,
    pub runs: usize,
    pub seed: u64,
    pub final_mcmc_iters: usize,
    pub final_burnin: usize,
    /// Shape of the symmetric Dirichlet prior used for estimation.
    #[serde(default = "default_prior_shape")]
    pub prior_shape: f64,
    /// Fraction of steps whose mechanism is re-certified; `1.0` audits all.
    #[serde(default = "default_audit_fraction")]
    pub audit_fraction: f64,
}

impl ExperimentConfig {
    /// Desk-scale defaults: 2000 steps, 20 runs, adaptive honest-response
    /// selection, SGLD with 20 updates of minibatch 50 per step.
    pub fn desk(num_categories: usize, epsilon: f64, rho: f64) -> Self {
        Self {
            num_categories,
            epsilon,
            kappa: 0.9,
            rho,
            steps: 2000,
            mode: SelectionMode::Adaptive {
                utility: UtilityKind::HonestResponse,
            },
            sampler: SamplerChoice::Sgld(SgldConfig::default()),
            runs: 20,
            seed: 0,
            final_mcmc_iters: 2000,
            final_burnin: 1000,
            prior_shape: 1.0,
            audit_fraction: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_categories < 2 {
            return Err(invalid("num_categories", "need at least 2 categories"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(invalid("kappa", format!("kappa must be in (0,1), got {}", self.kappa)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho", format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.prior_shape > 0.0 && self.prior_shape.is_finite()) {
            return Err(invalid("prior_shape", format!("prior shape must be positive, got {}", self.prior_shape)));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "need at least one step"));
        }
        if self.runs == 0 {
            return Err(invalid("runs", "need at least one run"));
        }
        if self.final_burnin >= self.final_mcmc_iters {
            return Err(invalid(
                "final_burnin",
                format!(
                    "burn-in ({}) must be smaller than the final iteration count ({})",
                    self.final_burnin, self.final_mcmc_iters
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.audit_fraction) {
            return Err(invalid("audit_fraction", format!("must be in [0,1], got {}", self.audit_fraction)));
        }
        if let SelectionMode::SemiAdaptive { alpha } = self.mode {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(invalid("alpha", format!("alpha must be in (0,1), got {alpha}")));
            }
        }
        match self.sampler {
            SamplerChoice::Sgld(c) => c.validate(),
            SamplerChoice::Gibbs { sweeps: 0 } => Err(invalid("sweeps", "need at least one Gibbs sweep per step")),
            SamplerChoice::Gibbs { .. } => Ok(()),
        }
    }

    /// Audit every `stride`-th step, starting with the first; `None` disables.
    pub(crate) fn audit_stride(&self) -> Option<usize> {
        (self.audit_fraction > 0.0).then(|| (1.0 / self.audit_fraction).round().max(1.0) as usize)
    }
}
