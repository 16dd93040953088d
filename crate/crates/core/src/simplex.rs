//! Probability vectors on the simplex and the sampling primitives built on them.
//!
//! Category indices are zero-based throughout the crate.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute tolerance on the component sum of a [`ProbVector`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A point on the probability simplex with at least two categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector {
    values: Vec<f64>,
}

impl ProbVector {
    /// Builds a probability vector from non-negative weights, renormalizing
    /// them to sum to one.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidProbVector(format!(
                "need at least 2 categories, got {}",
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidProbVector(format!(
                "component {i} is {w}; weights must be finite and non-negative"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidProbVector("weights sum to zero".into()));
        }
        let mut values: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        // one more pass brings the sum within a few ulps of 1
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE / 4.0 {
            values.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Self { values })
    }

    pub fn uniform(num_categories: usize) -> Result<Self> {
        Self::new(vec![1.0; num_categories])
    }

    pub fn point_mass(num_categories: usize, index: usize) -> Result<Self> {
        if index >= num_categories {
            return Err(Error::CategoryOutOfRange {
                index,
                num_categories,
            });
        }
        let mut w = vec![0.0; num_categories];
        w[index] = 1.0;
        Self::new(w)
    }

    /// Number of categories `K`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// True when every component is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// Returns a copy with categories relabeled: output component `i` is
    /// input component `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: perm.len(),
            });
        }
        Self::new(perm.iter().map(|&p| self.values[p]).collect())
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.values
    }
}

/// Ordering of categories by decreasing probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortPermutation {
    order: Vec<usize>,
}

impl SortPermutation {
    /// `order[r]` is the category with the `r`-th largest probability.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// The first `k` categories of the ordering.
    pub fn prefix(&self, k: usize) -> &[usize] {
        &self.order[..k]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Sorts categories by decreasing probability; ties keep ascending index order.
pub fn sort_descending(theta: &ProbVector) -> SortPermutation {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    // stable sort, so equal entries stay in index order
    order.sort_by(|&a, &b| theta.values[b].total_cmp(&theta.values[a]));
    SortPermutation { order }
}

/// Concentration parameters of a Dirichlet distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletParams {
    shapes: Vec<f64>,
}

impl DirichletParams {
    pub fn new(shapes: Vec<f64>) -> Result<Self> {
        if shapes.len() < 2 {
            return Err(invalid("shapes", "need at least 2 categories"));
        }
        if shapes.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(invalid("shapes", "all shapes must be finite and > 0"));
        }
        Ok(Self { shapes })
    }

    /// `Dir(rho, ..., rho)` over `num_categories` categories.
    pub fn symmetric(num_categories: usize, rho: f64) -> Result<Self> {
        Self::new(vec![rho; num_categories])
    }

    pub fn shapes(&self) -> &[f64] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    /// Mean of the distribution, `rho_k / sum(rho)`.
    pub fn mean(&self) -> ProbVector {
        ProbVector::new(self.shapes.clone()).expect("shapes are positive")
    }
}

impl TryFrom<Vec<f64>> for DirichletParams {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DirichletParams> for Vec<f64> {
    fn from(p: DirichletParams) -> Self {
        p.shapes
    }
}

/// Draws `ln G` for `G ~ Gamma(shape, 1)`.
///
/// Shapes below one use `G = G' * U^(1/shape)` with `G' ~ Gamma(shape + 1, 1)`,
/// evaluated in log space so that tiny shapes do not underflow to zero.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("shape is positive");
        return g.sample(rng).ln();
    }
    let g = Gamma::new(shape + 1.0, 1.0).expect("shape is positive");
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    g.sample(rng).ln() + u.ln() / shape
}

/// Draws a probability vector from `Dir(params)` by normalizing independent
/// gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(params: &DirichletParams, rng: &mut R) -> ProbVector {
    let logs: Vec<f64> = params
        .shapes
        .iter()
        .map(|&s| sample_log_gamma(s, rng))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    ProbVector::new(weights).expect("largest weight is exactly one")
}

/// Draws a category index with probability `theta[i]`.
pub fn sample_categorical<R: Rng + ?Sized>(theta: &ProbVector, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, &p) in theta.values.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    // u landed in the rounding gap above the final cumulative sum
    theta
        .values
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("a probability vector has positive mass")
}

/// Total variation distance `0.5 * sum |a_i - b_i|`.
pub fn tv_distance(a: &ProbVector, b: &ProbVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok((0.5 * sum).min(1.0))
}
