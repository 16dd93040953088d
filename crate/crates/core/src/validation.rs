//! Self-checks of the library's invariants against independent numerical
//! oracles: exhaustive privacy certification, finite-difference gradients
//! and Fisher information, and exhaustive subset search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::inference::{grad_log_likelihood, grad_log_prior, GammaState};
use crate::mechanism::{build_transition_matrix, verify_ldp, MechanismSpec, SubsetSpec, LDP_CERT_TOLERANCE};
use crate::simplex::{sample_dirichlet, sort_descending, DirichletParams, ProbVector};
use crate::utility::{fisher_matrix, utility_u6};

/// Outcome of one family of checks. `worst` is the largest discrepancy seen,
/// in the unit described by `detail`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const LDP_GRID_K: [usize; 5] = [2, 3, 5, 10, 20];
pub const LDP_GRID_EPSILON: [f64; 4] = [0.1, 0.5, 1.0, 5.0];
pub const LDP_GRID_KAPPA: [f64; 3] = [0.5, 0.8, 0.9];

/// Certifies every prefix mechanism on the standard grid over all `K^3`
/// ratios. `worst` is the largest `max_log_ratio / eps`.
pub fn ldp_grid_audit() -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut all_certified = true;
    for &kt in &LDP_GRID_K {
        for &eps in &LDP_GRID_EPSILON {
            for &kappa in &LDP_GRID_KAPPA {
                for k in 0..kt {
                    let subset = SubsetSpec::new((0..k).collect(), kt).expect("prefix is valid");
                    let spec = MechanismSpec::new(subset, eps, kappa).expect("grid parameters are valid");
                    let report = verify_ldp(&build_transition_matrix(&spec), eps);
                    worst = worst.max(report.max_log_ratio / eps);
                    all_certified &= report.certified;
                    cases += 1;
                }
            }
        }
    }
    CheckResult {
        name: "ldp-grid",
        passed: all_certified && worst <= 1.0 + LDP_CERT_TOLERANCE,
        cases,
        worst,
        detail: format!("max log-ratio / epsilon over {cases} mechanisms"),
    }
}

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += step;
            b[i] -= step;
            (f(&a) - f(&b)) / (2.0 * step)
        })
        .collect()
}

fn relative_error(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    (num / den.max(1e-300)).sqrt()
}

fn random_subset<R: Rng>(kt: usize, rng: &mut R) -> SubsetSpec {
    let k = rng.random_range(0..kt);
    let mut idx: Vec<usize> = (0..kt).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
    idx.truncate(k);
    SubsetSpec::new(idx, kt).expect("distinct in-range members")
}

/// Prior and likelihood gradients of the gamma surrogate against central
/// differences (step `1e-6`). `worst` is the largest relative error.
pub fn gradient_check(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let kt = [2, 5, 10, 20][rng.random_range(0..4)];
        let rho: Vec<f64> = (0..kt).map(|_| rng.random_range(0.3..4.0)).collect();
        let phi: Vec<f64> = (0..kt).map(|_| rng.random_range(0.2..3.0)).collect();
        let state = GammaState::new(phi, DirichletParams::new(rho.clone()).expect("positive shapes"))
            .expect("positive phi");

        let log_prior = |p: &[f64]| -> f64 { p.iter().zip(&rho).map(|(&x, &r)| (r - 1.0) * x.ln() - x).sum() };
        let fd = central_diff(log_prior, state.phi(), 1e-6);
        worst = worst.max(relative_error(&grad_log_prior(&state), &fd));

        let spec = MechanismSpec::new(random_subset(kt, &mut rng), rng.random_range(0.1..5.0), rng.random_range(0.5..0.95))
            .expect("valid budget");
        let y = rng.random_range(0..kt);
        let log_lik = |p: &[f64]| -> f64 {
            let total: f64 = p.iter().sum();
            let theta: Vec<f64> = p.iter().map(|x| x / total).collect();
            spec.likelihood(y, &theta).ln()
        };
        let fd = central_diff(log_lik, state.phi(), 1e-6);
        worst = worst.max(relative_error(&grad_log_likelihood(&state, y, &spec), &fd));
    }
    CheckResult {
        name: "gradients",
        passed: worst < 1e-5,
        cases,
        worst,
        detail: "max relative error against central differences".into(),
    }
}

/// Negative Hessian of the expected log-likelihood `v -> sum_y h0(y) ln h(y|v)`
/// at `theta`, by central differences in the first `K-1` coordinates.
pub fn finite_difference_fisher(theta: &ProbVector, spec: &MechanismSpec, step: f64) -> Vec<Vec<f64>> {
    let kt = theta.len();
    let t0 = theta.as_slice();
    let h0: Vec<f64> = (0..kt).map(|y| spec.likelihood(y, t0)).collect();
    // sum_y h0 ln(h/h0), with h - h0 formed from the perturbation directly
    let objective = |delta: &[f64]| -> f64 {
        let last = -delta.iter().sum::<f64>();
        (0..kt)
            .map(|y| {
                let mut dh = spec.prob(y, kt - 1) * last;
                for (x, d) in delta.iter().enumerate() {
                    dh += spec.prob(y, x) * d;
                }
                h0[y] * (dh / h0[y]).ln_1p()
            })
            .sum()
    };
    let d = kt - 1;
    let mut out = vec![vec![0.0; d]; d];
    let mut v = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            let mut eval = |si: f64, sj: f64| {
                v.fill(0.0);
                v[i] += si * step;
                v[j] += sj * step;
                objective(&v)
            };
            let second = eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0);
            out[i][j] = -second / (4.0 * step * step);
        }
    }
    out
}

/// Fisher matrices at random interior points: symmetric, positive definite,
/// and equal to the finite-difference Hessian. `worst` is the largest
/// relative Frobenius error; any indefinite matrix fails the check.
pub fn fisher_check(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for case in 0..cases {
        let kt = rng.random_range(2..=10);
        let theta = sample_dirichlet(&DirichletParams::symmetric(kt, 2.0).expect("positive"), &mut rng);
        if !theta.is_interior() {
            continue;
        }
        let spec = MechanismSpec::new(random_subset(kt, &mut rng), rng.random_range(0.1..5.0), rng.random_range(0.5..0.95))
            .expect("valid budget");
        let f = fisher_matrix(&theta, &spec).expect("interior theta");
        if f.max_asymmetry() > 1e-12 * f.matrix().amax() || f.min_eigenvalue() <= 0.0 {
            failures.push(case);
        }
        let fd = finite_difference_fisher(&theta, &spec, 1e-5);
        let flat: Vec<f64> = fd.iter().flatten().copied().collect();
        worst = worst.max(relative_error(f.matrix().transpose().as_slice(), &flat));
    }
    CheckResult {
        name: "fisher",
        passed: failures.is_empty() && worst < 1e-4,
        cases,
        worst,
        detail: if failures.is_empty() {
            "max relative Frobenius error against the finite-difference Hessian".into()
        } else {
            format!("not symmetric positive definite in cases {failures:?}")
        },
    }
}

/// Maximum of `U6` over sorted prefixes against the maximum over all
/// `2^K - 1` proper subsets. `worst` counts the cases where they differ.
pub fn prefix_optimality_check(max_categories: usize, per_size: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    let mut cases = 0;
    for kt in 2..=max_categories {
        for _ in 0..per_size {
            let theta = sample_dirichlet(&DirichletParams::symmetric(kt, 1.0).expect("positive"), &mut rng);
            let eps = rng.random_range(0.1..5.0);
            let u6 = |members: Vec<usize>| -> f64 {
                let spec = MechanismSpec::new(SubsetSpec::new(members, kt).expect("valid subset"), eps, 0.9)
                    .expect("valid budget");
                utility_u6(&theta, &spec).expect("matching dimensions")
            };
            let order = sort_descending(&theta);
            let prefix_max = (0..kt).map(|k| u6(order.prefix(k).to_vec())).fold(f64::NEG_INFINITY, f64::max);
            let global_max = (0u64..(1 << kt) - 1)
                .map(|mask| u6((0..kt).filter(|i| mask >> i & 1 == 1).collect()))
                .fold(f64::NEG_INFINITY, f64::max);
            if prefix_max != global_max {
                mismatches += 1;
            }
            cases += 1;
        }
    }
    CheckResult {
        name: "prefix-optimality",
        passed: mismatches == 0,
        cases,
        worst: mismatches as f64,
        detail: "cases where the best prefix differs from the best subset".into(),
    }
}

/// The full suite run by `adobest validate`.
pub fn run_validation_suite(seed: u64) -> ValidationReport {
    ValidationReport {
        checks: vec![
            ldp_grid_audit(),
            gradient_check(100, seed),
            fisher_check(200, seed.wrapping_add(1)),
            prefix_optimality_check(8, 50, seed.wrapping_add(2)),
        ],
    }
}
