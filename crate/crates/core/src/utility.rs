//! Utility functions that score how informative a randomized response is,
//! and the subset search that maximizes them.
//!
//! Candidates are restricted to prefixes of the categories sorted by
//! decreasing probability, `k = 0, ..., K-1`, each with its own `eps2`.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flops::Real;
use crate::mechanism::{epsilon2_real, MechanismSpec, SubsetSpec};
use crate::simplex::{sort_descending, tv_distance, ProbVector};

/// Condition-number ceiling above which the Fisher utility is disqualified.
pub const FIM_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UtilityKind {
    /// `-Tr[F^-1]`.
    #[serde(rename = "fisher")]
    FisherTraceInv,
    /// Negative entropy of the response marginal.
    #[serde(rename = "entropy")]
    NegEntropy,
    /// Expected TV shift between prior and posterior of `X`.
    #[serde(rename = "tv-posterior")]
    TvPosteriorShift,
    /// Negative TV between the response marginal and `theta`.
    #[serde(rename = "tv-marginal")]
    TvMarginalMatch,
    /// Negative MSE of the Bayes estimator of `e_X` given `Y`.
    #[serde(rename = "mse")]
    NegBayesMse,
    /// Probability that the report equals the truth.
    #[serde(rename = "honest")]
    HonestResponse,
}

impl UtilityKind {
    pub const ALL: [UtilityKind; 6] = [
        UtilityKind::FisherTraceInv,
        UtilityKind::NegEntropy,
        UtilityKind::TvPosteriorShift,
        UtilityKind::TvMarginalMatch,
        UtilityKind::NegBayesMse,
        UtilityKind::HonestResponse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            UtilityKind::FisherTraceInv => "fisher",
            UtilityKind::NegEntropy => "entropy",
            UtilityKind::TvPosteriorShift => "tv-posterior",
            UtilityKind::TvMarginalMatch => "tv-marginal",
            UtilityKind::NegBayesMse => "mse",
            UtilityKind::HonestResponse => "honest",
        }
    }
}

impl fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UtilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UtilityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                invalid(
                    "utility",
                    format!("unknown utility `{s}` (expected fisher, entropy, tv-posterior, tv-marginal, mse or honest)"),
                )
            })
    }
}

/// The `(K-1) x (K-1)` Fisher information of the response in the reduced
/// parametrization `(theta_1, ..., theta_{K-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    matrix: DMatrix<f64>,
}

impl FisherMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `Tr[F^-1]` through a Cholesky solve, or `None` when `F` is not
    /// numerically positive definite or its 1-norm condition number exceeds
    /// [`FIM_CONDITION_LIMIT`].
    pub fn trace_inverse(&self) -> Option<f64> {
        let chol = self.matrix.clone().cholesky()?;
        let inv = chol.inverse();
        let cond = norm1(&self.matrix) * norm1(&inv);
        if !cond.is_finite() || cond > FIM_CONDITION_LIMIT {
            return None;
        }
        let tr = inv.trace();
        tr.is_finite().then_some(tr)
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_dims(theta: &ProbVector, spec: &MechanismSpec) -> Result<()> {
    if theta.len() != spec.num_categories() {
        return Err(Error::DimensionMismatch {
            expected: spec.num_categories(),
            actual: theta.len(),
        });
    }
    Ok(())
}

fn require_interior(theta: &ProbVector) -> Result<()> {
    match theta.as_slice().iter().position(|&v| v <= 0.0) {
        Some(index) => Err(Error::NonInterior {
            index,
            value: theta.get(index),
        }),
        None => Ok(()),
    }
}

/// `F = A^T D^-1 A` with `A(i,j) = g(i|j) - g(i|K)` and `D = diag(h(.|theta))`.
pub fn fisher_matrix(theta: &ProbVector, spec: &MechanismSpec) -> Result<FisherMatrix> {
    check_dims(theta, spec)?;
    require_interior(theta)?;
    let k = theta.len();
    let d = k - 1;
    let h = spec.marginal(theta.as_slice());
    let mut f = DMatrix::<f64>::zeros(d, d);
    let mut row = vec![0.0; d];
    for (y, &hy) in h.iter().enumerate() {
        let last = spec.prob(y, k - 1);
        for (j, r) in row.iter_mut().enumerate() {
            *r = spec.prob(y, j) - last;
        }
        for i in 0..d {
            let ri = row[i] / hy;
            for j in i..d {
                f[(i, j)] += ri * row[j];
            }
        }
    }
    f.fill_lower_triangle_with_upper_triangle();
    Ok(FisherMatrix { matrix: f })
}

/// `U1 = -Tr[F^-1]`; `-inf` when the Fisher matrix is too ill-conditioned.
pub fn utility_u1(theta: &ProbVector, spec: &MechanismSpec) -> Result<f64> {
    let f = fisher_matrix(theta, spec)?;
    Ok(f.trace_inverse().map_or(f64::NEG_INFINITY, |t| -t))
}

/// `U2 = sum_y h(y) ln h(y)`.
pub fn utility_u2(theta: &ProbVector, spec: &MechanismSpec) -> Result<f64> {
    check_dims(theta, spec)?;
    let h = spec.marginal(theta.as_slice());
    let neg_entropy: f64 = h.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum();
    Ok(neg_entropy.min(0.0))
}

/// `U3 = 1/2 sum_x sum_y |g(y|x) theta_x - h(y) theta_x|`.
pub fn utility_u3(theta: &ProbVector, spec: &MechanismSpec) -> Result<f64> {
    check_dims(theta, spec)?;
    let t = theta.as_slice();
    let h = spec.marginal(t);
    let mut total = 0.0;
    for (x, &tx) in t.iter().enumerate() {
        if tx == 0.0 {
            continue;
        }
        let col: f64 = h.iter().enumerate().map(|(y, &hy)| (spec.prob(y, x) - hy).abs()).sum();
        total += tx * col;
    }
    Ok((0.5 * total).clamp(0.0, 1.0))
}

/// `U4 = -TV(h(.|theta), theta)`.
pub fn utility_u4(theta: &ProbVector, spec: &MechanismSpec) -> Result<f64> {
    check_dims(theta, spec)?;
    let h = ProbVector::new(spec.marginal(theta.as_slice()))?;
    Ok(-tv_distance(&h, theta)?)
}

/// `U5 = sum_y sum_x g(y|x)^2 theta_x^2 / h(y) - 1`.
pub fn utility_u5(theta: &ProbVector, spec: &MechanismSpec) -> Result<f64> {
    check_dims(theta, spec)?;
    let t = theta.as_slice();
    let h = spec.marginal(t);
    let mut total = 0.0;
    for (y, &hy) in h.iter().enumerate() {
        let s: f64 = t
            .iter()
            .enumerate()
            .map(|(x, &tx)| {
                let j = spec.prob(y, x) * tx;
                j * j
            })
            .sum();
        total += s / hy;
    }
    Ok((total - 1.0).clamp(-1.0, 0.0))
}

/// `U6 = P(Y = X)`, in closed form.
pub fn utility_u6(theta: &ProbVector, spec: &MechanismSpec) -> Result<f64> {
    check_dims(theta, spec)?;
    let subset = spec.subset();
    let (mut mass_in, mut mass_out) = (0.0, 0.0);
    for (i, &t) in theta.as_slice().iter().enumerate() {
        if subset.contains(i) {
            mass_in += t;
        } else {
            mass_out += t;
        }
    }
    let k = subset.len() as f64;
    let rest = (spec.num_categories() - subset.len() - 1) as f64;
    let b = spec.budget();
    let honest_in = 1.0 / (1.0 + k * (-b.epsilon1()).exp());
    let honest_out = 1.0 / (1.0 + rest * (-b.epsilon2()).exp());
    Ok(honest_in * (mass_in + honest_out * mass_out))
}

pub fn utility(kind: UtilityKind, theta: &ProbVector, spec: &MechanismSpec) -> Result<f64> {
    match kind {
        UtilityKind::FisherTraceInv => utility_u1(theta, spec),
        UtilityKind::NegEntropy => utility_u2(theta, spec),
        UtilityKind::TvPosteriorShift => utility_u3(theta, spec),
        UtilityKind::TvMarginalMatch => utility_u4(theta, spec),
        UtilityKind::NegBayesMse => utility_u5(theta, spec),
        UtilityKind::HonestResponse => utility_u6(theta, spec),
    }
}

/// `U6` for every prefix `k = 0, ..., K-1` of probabilities already sorted in
/// decreasing order, by growing the subset one category at a time.
///
/// Constant work per prefix, so the whole sweep is `O(K)`.
pub fn honest_prefix_utilities<R: Real>(sorted: &[R], epsilon: R, kappa: R) -> Vec<R> {
    let n = sorted.len();
    let zero = R::from_f64(0.0);
    let one = R::from_f64(1.0);
    let epsilon1 = kappa * epsilon;
    let decay1 = (-epsilon1).exp();
    let mut total = zero;
    for &p in sorted {
        total = total + p;
    }
    let mut mass_in = zero;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            mass_in = mass_in + sorted[k - 1];
        }
        let epsilon2 = epsilon2_real(epsilon, epsilon1, n - k, k);
        let honest_in = one / (one + R::from_f64(k as f64) * decay1);
        let honest_out = one / (one + R::from_f64((n - k - 1) as f64) * (-epsilon2).exp());
        out.push(honest_in * (mass_in + honest_out * (total - mass_in)));
    }
    out
}

/// Outcome of a subset search.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetChoice {
    pub k_star: usize,
    pub subset: SubsetSpec,
    /// Utility of every prefix length; `None` for the semi-adaptive rule.
    pub utility_values: Option<Vec<f64>>,
}

fn argmax_smallest(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        if v.is_nan() || v == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(k);
        }
    }
    best
}

/// Picks the prefix length maximizing `kind`, ties going to the smallest `k`.
///
/// When every candidate is disqualified (only possible for the Fisher
/// utility) the search falls back to `k = 0`, i.e. plain SRR.
pub fn select_subset(theta: &ProbVector, epsilon: f64, kappa: f64, kind: UtilityKind) -> Result<SubsetChoice> {
    let order = sort_descending(theta);
    let n = theta.len();
    let values = match kind {
        UtilityKind::HonestResponse => {
            // validates epsilon and kappa
            PrivacyCheck::run(epsilon, kappa, n)?;
            let sorted: Vec<f64> = order.order().iter().map(|&i| theta.get(i)).collect();
            honest_prefix_utilities(&sorted, epsilon, kappa)
        }
        _ => (0..n)
            .map(|k| {
                let spec = MechanismSpec::new(SubsetSpec::prefix(&order, k)?, epsilon, kappa)?;
                utility(kind, theta, &spec)
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    let k_star = argmax_smallest(&values).unwrap_or_else(|| {
        warn!("all {n} candidate subsets disqualified under {kind}; falling back to SRR");
        0
    });
    Ok(SubsetChoice {
        k_star,
        subset: SubsetSpec::prefix(&order, k_star)?,
        utility_values: Some(values),
    })
}

struct PrivacyCheck;

impl PrivacyCheck {
    fn run(epsilon: f64, kappa: f64, n: usize) -> Result<()> {
        crate::mechanism::PrivacyBudget::new(epsilon, kappa, 0, n).map(|_| ())
    }
}

/// Smallest prefix whose probability mass reaches `alpha`, capped at `K-1`.
pub fn select_subset_semi_adaptive(theta: &ProbVector, alpha: f64) -> Result<SubsetChoice> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("alpha must be in (0,1), got {alpha}")));
    }
    let order = sort_descending(theta);
    let n = theta.len();
    let mut cum = 0.0;
    let mut k_star = n;
    for (r, &i) in order.order().iter().enumerate() {
        cum += theta.get(i);
        if cum >= alpha {
            k_star = r + 1;
            break;
        }
    }
    let k_star = k_star.min(n - 1);
    Ok(SubsetChoice {
        k_star,
        subset: SubsetSpec::prefix(&order, k_star)?,
        utility_values: None,
    })
}
