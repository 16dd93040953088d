//! Randomized response mechanisms.
//!
//! The standard mechanism (SRR) reports the true category with probability
//! `e^eps / (e^eps + |Omega| - 1)` and otherwise a uniform other category.
//! The restricted mechanism (RRRR) confines its answer to a subset `S` plus
//! one element drawn from the complement, spending `eps1` inside `S u {R}`
//! and `eps2` inside `S^c`.
//!
//! Transition matrices are stored with rows indexed by the output `y` and
//! columns by the input `x`, so the response marginal is `G * theta`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flops::Real;
use crate::simplex::{ProbVector, SortPermutation};

/// Multiplicative slack allowed on `eps` when certifying a matrix.
pub const LDP_CERT_TOLERANCE: f64 = 1e-9;

/// Largest `eps2` for which RRRR with inner budget `eps1` stays `eps`-LDP.
///
/// Returns `eps` when `k = 0` or `eps - eps1 >= ln |S^c|`, otherwise
/// `min(eps, ln((c - 1) / (e^(eps1 - eps) c - 1)))` with `c = |S^c|`.
pub fn derive_epsilon2(epsilon: f64, epsilon1: f64, complement_size: usize, k: usize) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be finite and > 0, got {epsilon}")));
    }
    if !(epsilon1 > 0.0) {
        return Err(invalid("epsilon1", format!("must be > 0, got {epsilon1}")));
    }
    if epsilon1 > epsilon {
        return Err(invalid(
            "epsilon1",
            format!("epsilon1 = {epsilon1} exceeds epsilon = {epsilon}"),
        ));
    }
    if complement_size == 0 {
        return Err(Error::InvalidSubset(
            "the subset may not cover every category".into(),
        ));
    }
    Ok(epsilon2_real(epsilon, epsilon1, complement_size, k))
}

/// Unchecked `eps2` formula, generic so its cost can be counted.
pub(crate) fn epsilon2_real<R: Real>(epsilon: R, epsilon1: R, complement_size: usize, k: usize) -> R {
    if k == 0 {
        return epsilon;
    }
    let c = R::from_f64(complement_size as f64);
    let gap = epsilon1 - epsilon; // <= 0
    if -gap >= c.ln() {
        return epsilon;
    }
    // ln((c-1)/(c e^gap - 1)) = ln1p(-c expm1(gap) / (c e^gap - 1)), which
    // stays accurate when gap is tiny.
    let one = R::from_f64(1.0);
    let denom = c * gap.exp() - one;
    let value = (-(c * gap.exp_m1()) / denom).ln_1p();
    epsilon.min(value)
}

/// Total budget `eps`, split fraction `kappa`, and the derived `eps1`, `eps2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    kappa: f64,
    epsilon1: f64,
    epsilon2: f64,
}

impl PrivacyBudget {
    /// Budget for a subset of `subset_size` categories out of `num_categories`.
    pub fn new(epsilon: f64, kappa: f64, subset_size: usize, num_categories: usize) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(invalid("kappa", format!("kappa must be in (0,1), got {kappa}")));
        }
        if subset_size >= num_categories {
            return Err(Error::InvalidSubset(format!(
                "subset size {subset_size} must be below the category count {num_categories}"
            )));
        }
        let epsilon1 = kappa * epsilon;
        let epsilon2 = derive_epsilon2(epsilon, epsilon1, num_categories - subset_size, subset_size)?;
        Ok(Self {
            epsilon,
            kappa,
            epsilon1,
            epsilon2,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn epsilon1(&self) -> f64 {
        self.epsilon1
    }

    pub fn epsilon2(&self) -> f64 {
        self.epsilon2
    }
}

/// A subset `S` of the categories, never the whole set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSpec {
    members: Vec<usize>,
    complement: Vec<usize>,
    membership: Vec<bool>,
}

impl SubsetSpec {
    pub fn new(members: Vec<usize>, num_categories: usize) -> Result<Self> {
        let mut membership = vec![false; num_categories];
        for &m in &members {
            if m >= num_categories {
                return Err(Error::CategoryOutOfRange {
                    index: m,
                    num_categories,
                });
            }
            if membership[m] {
                return Err(Error::InvalidSubset(format!("category {m} listed twice")));
            }
            membership[m] = true;
        }
        if members.len() >= num_categories {
            return Err(Error::InvalidSubset(
                "the subset may not cover every category".into(),
            ));
        }
        let complement = (0..num_categories).filter(|&i| !membership[i]).collect();
        Ok(Self {
            members,
            complement,
            membership,
        })
    }

    pub fn empty(num_categories: usize) -> Self {
        Self {
            members: Vec::new(),
            complement: (0..num_categories).collect(),
            membership: vec![false; num_categories],
        }
    }

    /// The `k` most probable categories according to `order`.
    pub fn prefix(order: &SortPermutation, k: usize) -> Result<Self> {
        if k > order.len() {
            return Err(Error::InvalidSubset(format!(
                "prefix length {k} exceeds {} categories",
                order.len()
            )));
        }
        Self::new(order.prefix(k).to_vec(), order.len())
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    pub fn contains(&self, category: usize) -> bool {
        self.membership[category]
    }

    /// `|S|`.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn num_categories(&self) -> usize {
        self.membership.len()
    }
}

/// The six distinct transition probabilities of RRRR.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CaseTable {
    in_same: f64,
    in_other: f64,
    in_to_out: f64,
    out_to_in: f64,
    out_same: f64,
    out_other: f64,
}

impl CaseTable {
    fn new(num_categories: usize, k: usize, epsilon1: f64, epsilon2: f64) -> Self {
        let kf = k as f64;
        let rest = (num_categories - k - 1) as f64;
        let e1 = (-epsilon1).exp();
        let e2 = (-epsilon2).exp();
        // e^a / (e^a + m) written as 1 / (1 + m e^-a) to stay finite for large a
        let honest1 = 1.0 / (1.0 + kf * e1);
        let other1 = e1 / (1.0 + kf * e1);
        let honest2 = 1.0 / (1.0 + rest * e2);
        let other2 = e2 / (1.0 + rest * e2);
        Self {
            in_same: honest1,
            in_other: other1,
            in_to_out: other1 / (num_categories - k) as f64,
            out_to_in: other1,
            out_same: honest2 * honest1,
            out_other: other2 * honest1,
        }
    }
}

/// A subset together with the budget derived for it.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismSpec {
    subset: SubsetSpec,
    budget: PrivacyBudget,
    table: CaseTable,
}

impl MechanismSpec {
    pub fn new(subset: SubsetSpec, epsilon: f64, kappa: f64) -> Result<Self> {
        let budget = PrivacyBudget::new(epsilon, kappa, subset.len(), subset.num_categories())?;
        Ok(Self::from_parts(subset, budget))
    }

    /// Plain SRR over all categories.
    pub fn srr(num_categories: usize, epsilon: f64, kappa: f64) -> Result<Self> {
        if num_categories < 2 {
            return Err(invalid("num_categories", "need at least 2 categories"));
        }
        Self::new(SubsetSpec::empty(num_categories), epsilon, kappa)
    }

    fn from_parts(subset: SubsetSpec, budget: PrivacyBudget) -> Self {
        let table = CaseTable::new(
            subset.num_categories(),
            subset.len(),
            budget.epsilon1,
            budget.epsilon2,
        );
        Self {
            subset,
            budget,
            table,
        }
    }

    pub fn subset(&self) -> &SubsetSpec {
        &self.subset
    }

    pub fn budget(&self) -> &PrivacyBudget {
        &self.budget
    }

    pub fn num_categories(&self) -> usize {
        self.subset.num_categories()
    }

    /// `g(y | x)`, the probability of reporting `y` when the truth is `x`.
    #[inline]
    pub fn prob(&self, y: usize, x: usize) -> f64 {
        let t = &self.table;
        match (self.subset.contains(x), self.subset.contains(y)) {
            (true, true) if x == y => t.in_same,
            (true, true) => t.in_other,
            (true, false) => t.in_to_out,
            (false, true) => t.out_to_in,
            (false, false) if x == y => t.out_same,
            (false, false) => t.out_other,
        }
    }

    /// `h(y | theta) = sum_x g(y|x) theta_x`.
    pub fn likelihood(&self, y: usize, theta: &[f64]) -> f64 {
        theta
            .iter()
            .enumerate()
            .map(|(x, &t)| self.prob(y, x) * t)
            .sum()
    }

    /// The full response marginal `h(. | theta)` in `O(K)`.
    pub fn marginal(&self, theta: &[f64]) -> Vec<f64> {
        let t = &self.table;
        let mass_in: f64 = self.subset.members.iter().map(|&i| theta[i]).sum();
        let mass_out: f64 = self.subset.complement.iter().map(|&i| theta[i]).sum();
        (0..theta.len())
            .map(|y| {
                let ty = theta[y];
                if self.subset.contains(y) {
                    ty * t.in_same + (mass_in - ty) * t.in_other + mass_out * t.out_to_in
                } else {
                    mass_in * t.in_to_out + ty * t.out_same + (mass_out - ty) * t.out_other
                }
            })
            .collect()
    }

    /// Probability that the report equals the truth given `x in S`.
    pub fn honest_prob_in_subset(&self) -> f64 {
        self.table.in_same
    }
}

/// `SRR(x; omega, eps)`: keep `x` with probability `e^eps / (e^eps + |omega| - 1)`,
/// otherwise report a uniformly chosen other element of `omega`.
fn srr_over<R: Rng + ?Sized>(x: usize, omega: &[usize], epsilon: f64, rng: &mut R) -> usize {
    let n = omega.len();
    debug_assert!(omega.contains(&x));
    if n == 1 {
        return x;
    }
    let keep = 1.0 / (1.0 + (n - 1) as f64 * (-epsilon).exp());
    if rng.random::<f64>() < keep {
        return x;
    }
    let pick = rng.random_range(0..n - 1);
    omega.iter().copied().filter(|&o| o != x).nth(pick).expect("pick < n - 1")
}

/// Runs the restricted mechanism on input `x`.
///
/// This is the sequential sampler: draw `R` from the complement (or perturb
/// `x` inside it), then apply SRR on `S u {R}`.
pub fn randomize<R: Rng + ?Sized>(spec: &MechanismSpec, x: usize, rng: &mut R) -> Result<usize> {
    let k_total = spec.num_categories();
    if x >= k_total {
        return Err(Error::CategoryOutOfRange {
            index: x,
            num_categories: k_total,
        });
    }
    let subset = &spec.subset;
    let budget = &spec.budget;
    let complement = subset.complement();
    let mut omega = Vec::with_capacity(subset.len() + 1);
    omega.extend_from_slice(subset.members());
    if subset.contains(x) {
        let r = complement[rng.random_range(0..complement.len())];
        omega.push(r);
        Ok(srr_over(x, &omega, budget.epsilon1, rng))
    } else {
        let r = srr_over(x, complement, budget.epsilon2, rng);
        omega.push(r);
        Ok(srr_over(r, &omega, budget.epsilon1, rng))
    }
}

/// A `K x K` column-stochastic matrix, entry `(y, x) = P(Y = y | X = x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    probs: Vec<f64>,
}

impl TransitionMatrix {
    /// Wraps an arbitrary row-major `K x K` matrix for auditing. Entries must
    /// be finite and non-negative; stochasticity is not enforced.
    pub fn from_rows(size: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != size * size {
            return Err(Error::DimensionMismatch {
                expected: size * size,
                actual: probs.len(),
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("probs", "entries must be finite and non-negative"));
        }
        Ok(Self { size, probs })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.probs[y * self.size + x]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn column(&self, x: usize) -> Vec<f64> {
        (0..self.size).map(|y| self.get(y, x)).collect()
    }

    /// Largest deviation of a column sum from one.
    pub fn max_column_sum_error(&self) -> f64 {
        (0..self.size)
            .map(|x| ((0..self.size).map(|y| self.get(y, x)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Materializes `G_{S,eps}` from the case table.
pub fn build_transition_matrix(spec: &MechanismSpec) -> TransitionMatrix {
    let k = spec.num_categories();
    let mut probs = Vec::with_capacity(k * k);
    for y in 0..k {
        for x in 0..k {
            probs.push(spec.prob(y, x));
        }
    }
    TransitionMatrix { size: k, probs }
}

/// Result of an exhaustive LDP audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdpReport {
    pub epsilon: f64,
    /// Largest `|ln(P(y|x) / P(y|x'))|` over all triples.
    pub max_log_ratio: f64,
    /// The `(x, x', y)` triple attaining the maximum.
    pub worst: (usize, usize, usize),
    pub certified: bool,
}

/// Checks `P(y|x) <= e^eps P(y|x')` for every triple `(x, x', y)`.
pub fn verify_ldp(tm: &TransitionMatrix, epsilon: f64) -> LdpReport {
    let k = tm.size;
    let mut max = 0.0f64;
    let mut worst = (0, 0, 0);
    for y in 0..k {
        for x in 0..k {
            let p = tm.get(y, x);
            for xp in 0..k {
                let q = tm.get(y, xp);
                let r = match (p > 0.0, q > 0.0) {
                    (true, true) => (p / q).ln(),
                    (false, false) => 0.0,
                    (true, false) => f64::INFINITY,
                    (false, true) => f64::NEG_INFINITY,
                };
                if r.abs() > max {
                    max = r.abs();
                    worst = (x, xp, y);
                }
            }
        }
    }
    LdpReport {
        epsilon,
        max_log_ratio: max,
        worst,
        certified: max <= epsilon * (1.0 + LDP_CERT_TOLERANCE),
    }
}

/// `h(. | theta) = G theta`.
pub fn response_marginal(tm: &TransitionMatrix, theta: &ProbVector) -> Result<ProbVector> {
    if theta.len() != tm.size {
        return Err(Error::DimensionMismatch {
            expected: tm.size,
            actual: theta.len(),
        });
    }
    let t = theta.as_slice();
    let h = (0..tm.size)
        .map(|y| (0..tm.size).map(|x| tm.get(y, x) * t[x]).sum())
        .collect();
    ProbVector::new(h)
}
