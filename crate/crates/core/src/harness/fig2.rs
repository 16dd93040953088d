use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mechanism::{MechanismSpec, SubsetSpec};
use crate::simplex::{sort_descending, ProbVector};
use crate::utility::utility_u6;

/// One point of the honest-response curves over geometric distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub ratio: f64,
    pub k: usize,
    pub u6: f64,
    pub srr_baseline: f64,
}

/// `theta_i` proportional to `ratio^-i`.
pub fn geometric_theta(num_categories: usize, ratio: f64) -> Result<ProbVector> {
    ProbVector::new((0..num_categories).map(|i| ratio.powf(-(i as f64))).collect())
}

/// `e^eps / (e^eps + K - 1)`.
pub fn srr_baseline(num_categories: usize, epsilon: f64) -> f64 {
    let e = epsilon.exp();
    e / (e + (num_categories - 1) as f64)
}

/// `P(Y = X)` for every prefix size `k` and every ratio, ratio-major.
pub fn reproduce_fig2(num_categories: usize, epsilon: f64, kappa: f64, ratios: &[f64]) -> Result<Vec<Fig2Row>> {
    if let Some(r) = ratios.iter().find(|r| !(**r > 1.0 && r.is_finite())) {
        return Err(invalid("ratios", format!("ratios must be finite and greater than 1, got {r}")));
    }
    let baseline = srr_baseline(num_categories, epsilon);
    let mut rows = Vec::with_capacity(ratios.len() * num_categories);
    for &ratio in ratios {
        let theta = geometric_theta(num_categories, ratio)?;
        let order = sort_descending(&theta);
        for k in 0..num_categories {
            let spec = MechanismSpec::new(SubsetSpec::prefix(&order, k)?, epsilon, kappa)?;
            rows.push(Fig2Row {
                ratio,
                k,
                u6: utility_u6(&theta, &spec)?,
                srr_baseline: baseline,
            });
        }
    }
    Ok(rows)
}

/// The row with the largest `u6` for `ratio`, smallest `k` on ties.
pub fn best_row(rows: &[Fig2Row], ratio: f64) -> Option<Fig2Row> {
    rows.iter()
        .filter(|r| r.ratio == ratio)
        .fold(None, |best: Option<Fig2Row>, r| match best {
            Some(b) if b.u6 >= r.u6 => Some(b),
            _ => Some(*r),
        })
}
