//! Langevin dynamics on the gamma surrogate, with minibatch gradients and
//! reflection at zero.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{phi_to_theta, GammaState, History};
use crate::error::{invalid, Result};
use crate::mechanism::MechanismSpec;
use crate::simplex::ProbVector;

/// Lower bound applied to `phi` after reflection, so `1/phi_i` stays finite.
pub const PHI_FLOOR: f64 = 1e-300;

/// Step size `gamma_t` as a function of the outer time index `t >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `gamma_t = scale / t`.
    InverseTime { scale: f64 },
    Constant { gamma: f64 },
}

impl StepSchedule {
    pub fn gamma(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::InverseTime { scale } => scale / t.max(1) as f64,
            StepSchedule::Constant { gamma } => gamma,
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            StepSchedule::InverseTime { scale } => scale,
            StepSchedule::Constant { gamma } => gamma,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(invalid("step_size", format!("step size must be positive, got {v}")))
        }
    }
}

/// How the Gaussian noise is scaled relative to the step size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScale {
    /// Noise `gamma * W`.
    #[default]
    PaperLiteral,
    /// Noise `sqrt(gamma) * W`, the usual Langevin scaling.
    SqrtGamma,
}

impl NoiseScale {
    fn coefficient(self, gamma: f64) -> f64 {
        match self {
            NoiseScale::PaperLiteral => gamma,
            NoiseScale::SqrtGamma => gamma.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgldConfig {
    pub updates_per_step: usize,
    pub minibatch: usize,
    pub step_size: StepSchedule,
    #[serde(default)]
    pub noise_scale: NoiseScale,
}

impl Default for SgldConfig {
    fn default() -> Self {
        Self {
            updates_per_step: 20,
            minibatch: 50,
            step_size: StepSchedule::InverseTime { scale: 0.5 },
            noise_scale: NoiseScale::PaperLiteral,
        }
    }
}

impl SgldConfig {
    /// `updates_per_step` may be zero (the chain is then frozen); the
    /// minibatch may not.
    pub fn validate(&self) -> Result<()> {
        if self.minibatch == 0 {
            return Err(invalid("minibatch", "minibatch size must be at least 1"));
        }
        self.step_size.validate()
    }
}

/// `(rho_i - 1) / phi_i - 1`.
pub fn grad_log_prior(state: &GammaState) -> Vec<f64> {
    state
        .phi()
        .iter()
        .zip(state.prior().shapes())
        .map(|(&p, &r)| (r - 1.0) / p - 1.0)
        .collect()
}

/// Gradient of `phi -> ln h(y | phi / sum(phi))`.
///
/// The chain rule through the normalization collapses to
/// `(g(y|i) - h) / (h * sum(phi))` for every component.
pub fn grad_log_likelihood(state: &GammaState, y: usize, spec: &MechanismSpec) -> Vec<f64> {
    let mut out = vec![0.0; state.num_categories()];
    accumulate_likelihood_grad(state.phi(), y, spec, 1.0, &mut out);
    out
}

fn accumulate_likelihood_grad(phi: &[f64], y: usize, spec: &MechanismSpec, weight: f64, out: &mut [f64]) {
    let total: f64 = phi.iter().sum();
    let theta: Vec<f64> = phi.iter().map(|p| p / total).collect();
    let h = spec.likelihood(y, &theta);
    let scale = weight / (h * total);
    for (i, o) in out.iter_mut().enumerate() {
        *o += (spec.prob(y, i) - h) * scale;
    }
}

/// Prior gradient plus the likelihood gradient over `batch`, scaled by
/// `n / |batch|`.
pub fn stochastic_gradient(state: &GammaState, history: &History, batch: &[usize]) -> Vec<f64> {
    let mut grad = grad_log_prior(state);
    if batch.is_empty() {
        return grad;
    }
    let weight = history.len() as f64 / batch.len() as f64;
    let obs = history.observations();
    for &t in batch {
        accumulate_likelihood_grad(state.phi(), obs[t].response, &obs[t].mechanism, weight, &mut grad);
    }
    grad
}

/// `|phi + (gamma/2) grad + c(gamma) noise|`, floored at [`PHI_FLOOR`].
pub fn sgld_step(state: &GammaState, grad: &[f64], gamma: f64, noise: &[f64], mode: NoiseScale) -> GammaState {
    let c = mode.coefficient(gamma);
    let mut next = state.clone();
    for ((p, g), w) in next.phi_mut().iter_mut().zip(grad).zip(noise) {
        *p = (*p + 0.5 * gamma * g + c * w).abs().max(PHI_FLOOR);
    }
    next
}

/// One update with a fresh minibatch drawn without replacement.
pub fn sgld_update<R: Rng + ?Sized>(
    state: &GammaState,
    history: &History,
    config: &SgldConfig,
    t: usize,
    rng: &mut R,
) -> GammaState {
    let n = history.len();
    let batch = if n == 0 {
        Vec::new()
    } else {
        index::sample(rng, n, config.minibatch.min(n)).into_vec()
    };
    let grad = stochastic_gradient(state, history, &batch);
    let noise: Vec<f64> = (0..state.num_categories()).map(|_| rng.sample(StandardNormal)).collect();
    sgld_step(state, &grad, config.step_size.gamma(t), &noise, config.noise_scale)
}

/// `updates_per_step` updates from `warm_start`, all at step size `gamma_t`.
pub fn sgld_sample<R: Rng + ?Sized>(
    history: &History,
    config: &SgldConfig,
    warm_start: GammaState,
    t: usize,
    rng: &mut R,
) -> (GammaState, ProbVector) {
    let mut state = warm_start;
    for _ in 0..config.updates_per_step {
        state = sgld_update(&state, history, config, t, rng);
    }
    let theta = phi_to_theta(&state);
    (state, theta)
}
