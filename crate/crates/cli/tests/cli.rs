use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use adobest_cli::args::{ModeArg, SamplerArg};
use adobest_cli::{experiment_from_args, Cli, Command as Sub};
use adobest_core::harness::{ExperimentConfig, SamplerChoice, SelectionMode};
use adobest_core::inference::{NoiseScale, StepSchedule};
use adobest_core::utility::UtilityKind;
use clap::Parser;

fn adobest(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adobest"))
        .args(args)
        .current_dir(dir)
        .env_remove("ADOBEST_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &[
    "simulate", "--k", "5", "--epsilon", "1", "--rho", "0.5", "--steps", "60", "--runs", "3", "--seed", "42",
    "--final-iters", "40", "--final-burnin", "20",
];

#[test]
fn simulate_flags_fill_defaults() {
    let cli = Cli::try_parse_from([
        "adobest", "simulate", "--k", "10", "--epsilon", "0.5", "--rho", "0.1", "--steps", "2000", "--runs", "20",
        "--seed", "42", "--out", "r.csv",
    ])
    .unwrap();
    let Sub::Simulate(a) = cli.command else { panic!("wrong subcommand") };
    assert_eq!(a.experiment.mode, ModeArg::Adaptive);
    assert_eq!(a.experiment.sampler, SamplerArg::Sgld);
    let cfg = experiment_from_args(&a.experiment).unwrap();
    assert_eq!(cfg.kappa, 0.9);
    assert_eq!(cfg.mode, SelectionMode::Adaptive { utility: UtilityKind::HonestResponse });
    match cfg.sampler {
        SamplerChoice::Sgld(s) => {
            assert_eq!((s.updates_per_step, s.minibatch), (20, 50));
            assert_eq!(s.step_size, StepSchedule::InverseTime { scale: 0.5 });
            assert_eq!(s.noise_scale, NoiseScale::PaperLiteral);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!((cfg.steps, cfg.runs, cfg.seed), (2000, 20, 42));
    assert_eq!((cfg.final_mcmc_iters, cfg.final_burnin), (2000, 1000));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = adobest(&["simulate", "--kappa", "1.5", "--k", "10", "--epsilon", "1", "--rho", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kappa must be in (0,1)"), "{}", stderr(&o));

    let o = adobest(&["simulate", "--k", "10", "--epsilon", "1", "--rho", "1", "--bogus", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--bogus"));

    let o = adobest(&["simulate", "--k", "10", "--epsilon", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--rho"));

    let o = adobest(&["fig2", "--k", "5", "--epsilon", "1", "--ratios", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ratios"));

    let o = adobest(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL.to_vec();
    args.extend(["--out", "r.csv", "--summary", "s.json", "--utility-log", "u.csv", "--chain-trace", "c.csv"]);
    let o = adobest(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("median TV error"));

    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "config_id,run,status,tv_error,mean_subset_size,wall_time_secs");
    assert_eq!(lines.len(), 4);
    for (i, line) in lines[1..].iter().enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[..3], ["0", &i.to_string(), "ok"]);
        let tv: f64 = f[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&tv));
        assert!(f[5].parse::<f64>().unwrap() >= 0.0);
    }

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["successful_runs"], 3);

    let u = fs::read_to_string(dir.path().join("u.csv")).unwrap();
    assert_eq!(u.lines().count(), 61);
    assert!(u.starts_with("step,response,subset_size,utility_k0,"));
    let c = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(c.lines().count(), 41);
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let mut args = SMALL.to_vec();
        args.extend(["--no-wall-time", "--out", name]);
        assert!(adobest(&args, dir.path()).status.success());
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);

    let mut args = SMALL.to_vec();
    args.extend(["--no-wall-time", "--out", "c.csv", "--threads", "1"]);
    assert!(adobest(&args, dir.path()).status.success());
    assert_eq!(fs::read(dir.path().join("c.csv")).unwrap(), a);
}

#[test]
fn dumped_config_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--k", "7", "--epsilon", "0.3", "--rho", "0.01", "--mode", "semi-adaptive", "--alpha", "0.95",
        "--noise", "sqrt-gamma", "--dump-config",
    ];
    let o = adobest(&args, dir.path());
    assert!(o.status.success());
    let first: ExperimentConfig = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(first.mode, SelectionMode::SemiAdaptive { alpha: 0.95 });
    fs::write(dir.path().join("cfg.json"), stdout(&o)).unwrap();

    let o = adobest(&["simulate", "--config", "cfg.json", "--dump-config"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let second: ExperimentConfig = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(first, second);
    assert_eq!(stdout(&o), fs::read_to_string(dir.path().join("cfg.json")).unwrap());
}

#[test]
fn bad_config_file_and_output_path_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{not json").unwrap();
    let o = adobest(&["simulate", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.json"));

    let o = adobest(&["simulate", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let mut args = SMALL.to_vec();
    args.extend(["--out", "no/such/dir/r.csv"]);
    let o = adobest(&args, dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_adobest"))
        .args(SMALL)
        .current_dir(dir.path())
        .env("ADOBEST_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ADOBEST_THREADS"));
    let o = Command::new(env!("CARGO_BIN_EXE_adobest"))
        .args(SMALL)
        .current_dir(dir.path())
        .env("ADOBEST_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn grid_writes_one_csv_per_config_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        steps: 50,
        runs: 2,
        final_mcmc_iters: 30,
        final_burnin: 10,
        ..ExperimentConfig::desk(4, 1.0, 1.0)
    };
    let configs = vec![
        base.clone(),
        ExperimentConfig {
            mode: SelectionMode::NonAdaptive,
            sampler: SamplerChoice::Gibbs { sweeps: 1 },
            ..base
        },
    ];
    fs::write(dir.path().join("grid.json"), serde_json::to_string(&serde_json::json!({ "configs": configs })).unwrap()).unwrap();
    let o = adobest(&["grid", "--config", "grid.json", "--out", "results/"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 2);
    for i in 0..2 {
        let csv = fs::read_to_string(dir.path().join(format!("results/config_{i}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with(&format!("{i},0,ok,")));
    }
    let summary: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results/summary.json")).unwrap()).unwrap();
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[1]["mean_subset_size"], 0.0);

    // a bare array is accepted too
    fs::write(dir.path().join("list.json"), serde_json::to_string(&configs[..1]).unwrap()).unwrap();
    let o = adobest(&["grid", "--config", "list.json", "--out", "r2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn inspect_mechanism_dumps_matrix_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = adobest(&["inspect-mechanism", "--k", "20", "--epsilon", "1", "--kappa", "0.9", "--subset-size", "5"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 22);
    assert_eq!(lines[0].split(',').count(), 21);
    // columns are distributions over responses
    for x in 1..=20 {
        let total: f64 = lines[1..21].iter().map(|l| l.split(',').nth(x).unwrap().parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    assert!(lines[21].starts_with("certified"));

    let o = adobest(
        &["inspect-mechanism", "--k", "6", "--epsilon", "2", "--subset", "1,4", "--out", "m.csv", "--report", "r.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["certified"], true);
    assert_eq!(fs::read_to_string(dir.path().join("m.csv")).unwrap().lines().count(), 7);

    let o = adobest(&["inspect-mechanism", "--k", "4", "--epsilon", "1", "--subset-size", "4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fig2_emits_curve_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = adobest(&["fig2", "--k", "20", "--epsilon", "1", "--ratios", "1.1,1.5,2,3"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "ratio,k,u6,srr_baseline");
    assert_eq!(lines.len(), 81);
    let e = std::f64::consts::E;
    for l in &lines[1..] {
        let baseline: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
        assert!((baseline - e / (e + 19.0)).abs() < 1e-15);
    }
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = adobest(&["validate", "--report", "v.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("validation passed"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 4);
}
