//! Exact Gibbs sampler: impute every true category, then draw `theta` from
//! its conjugate Dirichlet full conditional.

use rand::Rng;

use super::{fingerprint_words, History};
use crate::simplex::{sample_dirichlet, DirichletParams, ProbVector};

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    latent: Vec<usize>,
    theta: ProbVector,
}

impl GibbsState {
    /// A state with no imputed categories yet; the first sweep fills them in.
    pub fn new(theta: ProbVector) -> Self {
        Self {
            latent: Vec::new(),
            theta,
        }
    }

    pub fn latent(&self) -> &[usize] {
        &self.latent
    }

    pub fn theta(&self) -> &ProbVector {
        &self.theta
    }

    pub fn fingerprint(&self) -> u64 {
        let theta = self.theta.as_slice().iter().map(|t| t.to_bits());
        fingerprint_words(theta.chain(self.latent.iter().map(|&x| x as u64)))
    }
}

/// One full sweep, `O(n K)`.
///
/// The latent categories are drawn from `p(x | y, theta)`, which depends only
/// on the current `theta`, so a state built for a shorter history can be
/// swept against a longer one.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &GibbsState,
    history: &History,
    prior: &DirichletParams,
    rng: &mut R,
) -> GibbsState {
    let kt = history.num_categories();
    let theta = state.theta.as_slice();
    let mut counts = vec![0.0; kt];
    let mut weights = vec![0.0; kt];
    let mut latent = Vec::with_capacity(history.len());
    for obs in history.observations() {
        let mut total = 0.0;
        for (x, w) in weights.iter_mut().enumerate() {
            *w = theta[x] * obs.mechanism.prob(obs.response, x);
            total += *w;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        // last index with positive weight, in case rounding overshoots
        let mut pick = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        for (x, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = x;
                break;
            }
        }
        latent.push(pick);
        counts[pick] += 1.0;
    }
    let shapes: Vec<f64> = prior.shapes().iter().zip(&counts).map(|(r, c)| r + c).collect();
    let posterior = DirichletParams::new(shapes).expect("prior shapes plus counts are positive");
    GibbsState {
        latent,
        theta: sample_dirichlet(&posterior, rng),
    }
}
