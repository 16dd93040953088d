//! Posterior sampling for `theta` given a history of private reports.
//!
//! Two samplers are provided: a Langevin chain on an unnormalized gamma
//! surrogate `phi` (with `theta = phi / sum(phi)`), and an exact Gibbs sampler
//! that imputes the true categories. The Gibbs sampler costs `O(n K)` per
//! sweep and serves mainly as a reference.

mod gibbs;
mod sgld;

pub use gibbs::{gibbs_sweep, GibbsState};
pub use sgld::{
    grad_log_likelihood, grad_log_prior, sgld_sample, sgld_step, sgld_update, stochastic_gradient, NoiseScale,
    SgldConfig, StepSchedule, PHI_FLOOR,
};

use crate::error::{invalid, Error, Result};
use crate::mechanism::MechanismSpec;
use crate::simplex::{DirichletParams, ProbVector};

/// Gamma surrogate state: `phi_k > 0`, with prior `phi_k ~ Gamma(rho_k, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaState {
    phi: Vec<f64>,
    prior: DirichletParams,
}

impl GammaState {
    pub fn new(phi: Vec<f64>, prior: DirichletParams) -> Result<Self> {
        if phi.len() != prior.len() {
            return Err(Error::DimensionMismatch {
                expected: prior.len(),
                actual: phi.len(),
            });
        }
        if let Some(i) = phi.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(invalid("phi", format!("phi[{i}] = {} is not a positive finite number", phi[i])));
        }
        Ok(Self { phi, prior })
    }

    /// Starts at `phi = rho`, whose normalization is the prior mean.
    pub fn at_prior_mean(prior: DirichletParams) -> Self {
        Self {
            phi: prior.shapes().to_vec(),
            prior,
        }
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn prior(&self) -> &DirichletParams {
        &self.prior
    }

    pub fn num_categories(&self) -> usize {
        self.phi.len()
    }

    /// A cheap bit-level digest, used to check that chains are resumed
    /// exactly where they stopped.
    pub fn fingerprint(&self) -> u64 {
        fingerprint_words(self.phi.iter().map(|p| p.to_bits()))
    }

    pub(crate) fn phi_mut(&mut self) -> &mut [f64] {
        &mut self.phi
    }
}

/// FNV-1a over 64-bit words.
pub(crate) fn fingerprint_words(words: impl IntoIterator<Item = u64>) -> u64 {
    words.into_iter().fold(0xcbf2_9ce4_8422_2325u64, |h, w| {
        w.to_le_bytes()
            .iter()
            .fold(h, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
    })
}

/// `theta_k = phi_k / sum_j phi_j`.
pub fn phi_to_theta(state: &GammaState) -> ProbVector {
    ProbVector::new(state.phi.clone()).expect("phi is positive and finite")
}

/// One private report and the mechanism that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub response: usize,
    pub mechanism: MechanismSpec,
}

/// The reports collected so far. Append-only.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    num_categories: usize,
    observations: Vec<Observation>,
}

impl History {
    pub fn new(num_categories: usize) -> Self {
        Self {
            num_categories,
            observations: Vec::new(),
        }
    }

    pub fn push(&mut self, response: usize, mechanism: MechanismSpec) -> Result<()> {
        let k = self.num_categories;
        if mechanism.num_categories() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: mechanism.num_categories(),
            });
        }
        if response >= k {
            return Err(Error::CategoryOutOfRange {
                index: response,
                num_categories: k,
            });
        }
        self.observations.push(Observation { response, mechanism });
        Ok(())
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// `sum_t ln h(y_t | theta)`.
    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.observations
            .iter()
            .map(|o| o.mechanism.likelihood(o.response, theta).ln())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::sample_log_gamma;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn phi_to_theta_examples() {
        let prior = DirichletParams::symmetric(4, 1.0).unwrap();
        let s = GammaState::new(vec![1.0; 4], prior).unwrap();
        assert_eq!(phi_to_theta(&s).as_slice(), &[0.25; 4]);
        let s = GammaState::new(vec![2.0, 1.0, 1.0], DirichletParams::symmetric(3, 1.0).unwrap()).unwrap();
        assert_eq!(phi_to_theta(&s).as_slice(), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn normalized_gammas_are_dirichlet() {
        let rho = [0.5, 1.0, 2.0, 4.5];
        let total: f64 = rho.iter().sum();
        let prior = DirichletParams::new(rho.to_vec()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let n = 100_000;
        let mut sums = [0.0; 4];
        for _ in 0..n {
            let phi: Vec<f64> = rho.iter().map(|&r| sample_log_gamma(r, &mut rng).exp()).collect();
            let theta = phi_to_theta(&GammaState::new(phi, prior.clone()).unwrap());
            for (s, t) in sums.iter_mut().zip(theta.as_slice()) {
                *s += t;
            }
        }
        for (i, &r) in rho.iter().enumerate() {
            let m = r / total;
            let var = m * (1.0 - m) / (total + 1.0);
            let se = (var / n as f64).sqrt();
            assert!((sums[i] / n as f64 - m).abs() < 3.0 * se, "component {i}");
        }
    }

    #[test]
    fn gamma_state_validation() {
        let prior = DirichletParams::symmetric(3, 1.0).unwrap();
        assert!(GammaState::new(vec![1.0, 0.0, 1.0], prior.clone()).is_err());
        assert!(GammaState::new(vec![1.0, 1.0], prior.clone()).is_err());
        assert!(GammaState::new(vec![1.0, f64::INFINITY, 1.0], prior.clone()).is_err());
        let a = GammaState::at_prior_mean(prior.clone());
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.phi_mut()[1] = f64::from_bits(1.0f64.to_bits() + 1);
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn history_validation() {
        let mut h = History::new(3);
        let spec = MechanismSpec::srr(3, 1.0, 0.9).unwrap();
        assert!(h.push(3, spec.clone()).is_err());
        assert!(h.push(0, MechanismSpec::srr(4, 1.0, 0.9).unwrap()).is_err());
        h.push(2, spec).unwrap();
        assert_eq!(h.len(), 1);
    }
}
