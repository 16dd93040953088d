//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use adobest_core::flops::CountingReal;
use adobest_core::harness::{best_row, reproduce_fig2, run_grid, AggregateResult, ExperimentConfig, SelectionMode};
use adobest_core::inference::{
    gibbs_sweep, phi_to_theta, sgld_update, GammaState, GibbsState, History, NoiseScale, SgldConfig, StepSchedule,
};
use adobest_core::mechanism::{build_transition_matrix, randomize, MechanismSpec, SubsetSpec};
use adobest_core::simplex::{sample_categorical, sample_dirichlet, sort_descending, tv_distance, DirichletParams, ProbVector};
use adobest_core::utility::{honest_prefix_utilities, utility_u5, UtilityKind};
use adobest_core::validation::{fisher_check, gradient_check, ldp_grid_audit, prefix_optimality_check};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Master seed of every Monte Carlo criterion.
const SEED: u64 = 1;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit_secs: u64, elapsed: Duration, outcome: Outcome) -> Outcome {
    let secs = elapsed.as_secs_f64();
    match outcome {
        Ok(d) if secs < limit_secs as f64 => Ok(format!("{d}; {secs:.1}s")),
        Ok(d) => Err(format!("{d}; took {secs:.1}s, limit {limit_secs}s")),
        Err(d) => Err(format!("{d}; {secs:.1}s")),
    }
}

fn ldp_grid() -> Outcome {
    let r = ldp_grid_audit();
    check(r.passed, format!("{} mechanisms, max log-ratio/eps = {:.12}", r.cases, r.worst))
}

fn fisher_validity() -> Outcome {
    let r = fisher_check(200, SEED);
    check(r.passed, format!("{} cases, {}: {:.3e} (< 1e-4)", r.cases, r.detail, r.worst))
}

fn prefix_optimality() -> Outcome {
    let r = prefix_optimality_check(8, 50, SEED);
    check(r.passed, format!("{} cases, {} mismatches", r.cases, r.worst))
}

fn bayes_mse() -> Outcome {
    let theta = ProbVector::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let spec = MechanismSpec::new(SubsetSpec::new(vec![0, 1], 4).unwrap(), 1.0, 0.9).unwrap();
    let tm = build_transition_matrix(&spec);
    let posterior: Vec<Vec<f64>> = (0..4)
        .map(|y| {
            let joint: Vec<f64> = (0..4).map(|x| tm.get(y, x) * theta.get(x)).collect();
            let z: f64 = joint.iter().sum();
            joint.iter().map(|j| j / z).collect()
        })
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let n = 1_000_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let x = sample_categorical(&theta, &mut rng);
        let y = randomize(&spec, x, &mut rng).unwrap();
        let err: f64 = posterior[y]
            .iter()
            .enumerate()
            .map(|(i, p)| (if i == x { 1.0 } else { 0.0 } - p).powi(2))
            .sum();
        sum += err;
        sum_sq += err * err;
    }
    let mean = sum / n as f64;
    let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    let want = -utility_u5(&theta, &spec).unwrap();
    let z = (want - mean).abs() / se;
    check(z < 3.0, format!("-U5 = {want:.6}, simulated {mean:.6} (se {se:.2e}, {z:.2} se apart)"))
}

fn gradients() -> Outcome {
    let r = gradient_check(100, SEED);
    check(r.passed, format!("{} configurations, max relative error {:.3e} (< 1e-5)", r.cases, r.worst))
}

fn synthetic_history(kt: usize, n: usize, eps: f64, rng: &mut ChaCha20Rng) -> History {
    let truth = sample_dirichlet(&DirichletParams::symmetric(kt, 1.0).unwrap(), rng);
    let mut history = History::new(kt);
    for _ in 0..n {
        let guess = sample_dirichlet(&DirichletParams::symmetric(kt, 1.0).unwrap(), rng);
        let k = rng.random_range(0..kt);
        let spec = MechanismSpec::new(SubsetSpec::prefix(&sort_descending(&guess), k).unwrap(), eps, 0.9).unwrap();
        let x = sample_categorical(&truth, rng);
        history.push(randomize(&spec, x, rng).unwrap(), spec).unwrap();
    }
    history
}

fn gibbs_mean(history: &History, prior: &DirichletParams, burn: usize, keep: usize, rng: &mut ChaCha20Rng) -> ProbVector {
    let mut state = GibbsState::new(prior.mean());
    let mut mean = vec![0.0; history.num_categories()];
    for i in 0..burn + keep {
        state = gibbs_sweep(&state, history, prior, rng);
        if i >= burn {
            for (m, v) in mean.iter_mut().zip(state.theta().as_slice()) {
                *m += v;
            }
        }
    }
    ProbVector::new(mean).unwrap()
}

fn sgld_mean(history: &History, prior: &DirichletParams, config: &SgldConfig, burn: usize, keep: usize, rng: &mut ChaCha20Rng) -> ProbVector {
    let t = history.len();
    let mut state = GammaState::at_prior_mean(prior.clone());
    let mut mean = vec![0.0; history.num_categories()];
    for i in 0..burn + keep {
        state = sgld_update(&state, history, config, t, rng);
        if i >= burn {
            for (m, v) in mean.iter_mut().zip(phi_to_theta(&state).as_slice()) {
                *m += v;
            }
        }
    }
    ProbVector::new(mean).unwrap()
}

/// Posterior mean by midpoint quadrature on a triangular grid over the
/// 2-simplex.
fn quadrature_mean(history: &History, prior: &DirichletParams, step: f64) -> ProbVector {
    let cells = (1.0 / step).round() as usize;
    let mut points = Vec::new();
    for i in 0..cells {
        for j in 0..cells - i {
            let a = (i as f64 + 1.0 / 3.0) * step;
            let b = (j as f64 + 1.0 / 3.0) * step;
            let th = [a, b, 1.0 - a - b];
            let lp = th.iter().zip(prior.shapes()).map(|(t, r)| (r - 1.0) * t.ln()).sum::<f64>() + history.log_likelihood(&th);
            points.push((lp, th));
        }
    }
    let top = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut mean = [0.0; 3];
    for (lp, th) in &points {
        let w = (lp - top).exp();
        for (m, t) in mean.iter_mut().zip(th) {
            *m += w * t;
        }
    }
    ProbVector::new(mean.to_vec()).unwrap()
}

fn sampler_agreement() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let prior = DirichletParams::symmetric(5, 1.0).unwrap();
    // Langevin-scaled noise; see the crate README on the default noise scale
    let config = SgldConfig {
        updates_per_step: 1,
        minibatch: 50,
        step_size: StepSchedule::InverseTime { scale: 0.5 },
        noise_scale: NoiseScale::SqrtGamma,
    };
    let literal = SgldConfig {
        noise_scale: NoiseScale::PaperLiteral,
        ..config
    };
    let mut worst: f64 = 0.0;
    let mut worst_literal: f64 = 0.0;
    for _ in 0..5 {
        let history = synthetic_history(5, 200, 1.0, &mut rng);
        let g = gibbs_mean(&history, &prior, 2000, 40_000, &mut rng);
        let s = sgld_mean(&history, &prior, &config, 5000, 200_000, &mut rng);
        worst = worst.max(tv_distance(&g, &s).unwrap());
        let s = sgld_mean(&history, &prior, &literal, 5000, 200_000, &mut rng);
        worst_literal = worst_literal.max(tv_distance(&g, &s).unwrap());
    }

    let prior3 = DirichletParams::symmetric(3, 1.0).unwrap();
    let history = synthetic_history(3, 100, 1.0, &mut rng);
    let g = gibbs_mean(&history, &prior3, 2500, 2500, &mut rng);
    let q = quadrature_mean(&history, &prior3, 0.005);
    let quad_tv = tv_distance(&g, &q).unwrap();
    check(
        worst < 0.05 && quad_tv < 0.02,
        format!(
            "SGLD vs Gibbs max TV {worst:.4} (< 0.05; noise scaled by gamma instead of its root gives {worst_literal:.4}), Gibbs vs quadrature TV {quad_tv:.4} (< 0.02)"
        ),
    )
}

fn fig2() -> Outcome {
    let e = std::f64::consts::E;
    let rows = reproduce_fig2(20, 1.0, 0.9, &[1.5]).unwrap();
    let baseline_ok = rows.iter().all(|r| (r.srr_baseline - e / (e + 19.0)).abs() < 1e-15);
    let best = best_row(&rows, 1.5).unwrap();
    let gain1 = best.u6 / best.srr_baseline - 1.0;
    let rows5 = reproduce_fig2(20, 5.0, 0.9, &[1.5]).unwrap();
    let best5 = best_row(&rows5, 1.5).unwrap();
    let gain5 = best5.u6 / best5.srr_baseline - 1.0;
    check(
        baseline_ok && best.k > 0 && best.u6 > best.srr_baseline && gain5 < gain1,
        format!(
            "baseline {:.8} = e/(e+19); ratio 1.5: best k {} U6 {:.5}; relative gain eps=1 {gain1:.4} > eps=5 {gain5:.4}",
            best.srr_baseline, best.k, best.u6
        ),
    )
}

fn single(config: ExperimentConfig) -> AggregateResult {
    let mut out = run_grid(&[config]).unwrap();
    assert!(out[0].failures.is_empty(), "run failures: {:?}", out[0].failures);
    out.remove(0)
}

fn fig3_ordering() -> Outcome {
    let base = ExperimentConfig {
        seed: SEED,
        ..ExperimentConfig::desk(10, 0.5, 0.01)
    };
    let adaptive = single(ExperimentConfig {
        mode: SelectionMode::Adaptive {
            utility: UtilityKind::HonestResponse,
        },
        ..base.clone()
    });
    let non = single(ExperimentConfig {
        mode: SelectionMode::NonAdaptive,
        ..base.clone()
    });
    let (best_alpha, best_semi) = [0.2, 0.6, 0.8, 0.9, 0.95]
        .into_iter()
        .map(|alpha| {
            let r = single(ExperimentConfig {
                mode: SelectionMode::SemiAdaptive { alpha },
                ..base.clone()
            });
            (alpha, r.median)
        })
        .fold((f64::NAN, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    check(
        adaptive.median < non.median && adaptive.median <= 1.5 * best_semi,
        format!(
            "median TV adaptive {:.4}, non-adaptive {:.4}, best semi-adaptive {best_semi:.4} (alpha {best_alpha})",
            adaptive.median, non.median
        ),
    )
}

fn concentration() -> Outcome {
    let short = ExperimentConfig {
        seed: SEED,
        steps: 500,
        ..ExperimentConfig::desk(10, 1.0, 0.1)
    };
    let long = ExperimentConfig {
        steps: 5000,
        ..short.clone()
    };
    let a = single(short);
    let b = single(long);
    let wins = a.tv_errors.iter().zip(&b.tv_errors).filter(|(s, l)| l < s).count();
    check(
        wins * 5 >= a.tv_errors.len() * 4,
        format!("T=5000 beats T=500 in {wins}/{} paired runs (medians {:.4} -> {:.4})", a.tv_errors.len(), a.median, b.median),
    )
}

fn subset_trend() -> Outcome {
    let sizes: Vec<f64> = [0.01, 0.1, 1.0]
        .into_iter()
        .map(|rho| {
            single(ExperimentConfig {
                seed: SEED,
                ..ExperimentConfig::desk(10, 1.0, rho)
            })
            .mean_subset_size
        })
        .collect();
    check(
        sizes[0] < sizes[1] && sizes[1] < sizes[2],
        format!("mean |S| at rho 0.01, 0.1, 1: {:.3}, {:.3}, {:.3}", sizes[0], sizes[1], sizes[2]),
    )
}

fn honest_cost() -> Outcome {
    let count = |n: usize| {
        let mut theta: Vec<f64> = (0..n).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let total: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|t| *t /= total);
        let sorted: Vec<CountingReal> = theta.into_iter().map(CountingReal).collect();
        CountingReal::reset();
        let values = honest_prefix_utilities(&sorted, CountingReal(1.0), CountingReal(0.9));
        assert_eq!(values.len(), n);
        CountingReal::count()
    };
    let small = count(1_000);
    let big = count(10_000);
    let ratio = big as f64 / (10.0 * small as f64);
    check(ratio < 3.0, format!("ops at K=1e3: {small}, K=1e4: {big}; ratio to linear {ratio:.3} (< 3)"))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 11] = [
        ("AC1 LDP certification grid", 30, ldp_grid),
        ("AC2 Fisher information validity", 60, fisher_validity),
        ("AC3 prefix optimality by brute force", 60, prefix_optimality),
        ("AC4 U5 against simulated Bayes MSE", 60, bayes_mse),
        ("AC5 gradient checks", 30, gradients),
        ("AC6 sampler cross-validation", 300, sampler_agreement),
        ("AC7 honest-response curves", 10, fig2),
        ("AC8 desk-scale error ordering", 900, fig3_ordering),
        ("AC9 posterior concentration", 1200, concentration),
        ("AC10 subset size grows with rho", 900, subset_trend),
        ("AC11 linear prefix sweep cost", 60, honest_cost),
    ];
    let mut failed = 0;
    for (name, limit, criterion) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(criterion).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let outcome = within(limit, start.elapsed(), result);
        match outcome {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
