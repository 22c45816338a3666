//! Config → bundle pipeline, generators and the binary's exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use l1ball::stats::{mean, variance};
use l1ball_cli::config::ModelName;
use l1ball_cli::generate::Design;
use l1ball_cli::{generate_synthetic, run_experiment, CliError, Dataset, ExperimentConfig, GeneratorSpec};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

fn load(name: &str, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::load(&config_path(name)).unwrap();
    c.output_dir = out.to_path_buf();
    c
}

#[test]
fn every_bundled_config_validates() {
    let dir = config_path("regression_small").parent().unwrap().to_path_buf();
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn regression_small_writes_a_complete_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = run_experiment(&load("regression_small", tmp.path())).unwrap();
    for file in ["summary.json", "diagnostics.json", "metrics.csv", "samples_chain0.csv", "samples_chain1.csv", "data/X.csv", "data/y.csv", "data/truth.json"] {
        assert!(tmp.path().join(file).is_file(), "missing {file}");
    }
    assert_eq!(bundle.summary.model, ModelName::Regression);
    assert_eq!(bundle.summary.posterior.n_samples, 600);
    let rows = fs::read_to_string(tmp.path().join("samples_chain0.csv")).unwrap().lines().count();
    assert_eq!(rows, 301);
}

#[test]
fn identical_configs_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut config = load("regression_small", a.path());
    config.sampler.warmup = 100;
    config.sampler.samples = 100;
    run_experiment(&config).unwrap();
    config.output_dir = b.path().to_path_buf();
    run_experiment(&config).unwrap();
    for file in ["samples_chain0.csv", "samples_chain1.csv", "summary.json", "diagnostics.json", "data/X.csv", "data/truth.json"] {
        let (x, y) = (fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap());
        assert!(x == y, "{file} differs between runs");
    }
}

#[test]
fn theory_schedule_requires_b2_above_b3() {
    let text = fs::read_to_string(config_path("regression_theory")).unwrap().replace("b2 = 1.0, b3 = 0.5", "b2 = 0.5, b3 = 0.5");
    match ExperimentConfig::from_toml(&text) {
        Err(CliError::Config(msg)) => assert!(msg.contains("b2 > b3"), "{msg}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn generated_mixture_mean_matches_the_analytic_mean() {
    let spec = GeneratorSpec::Mixture {
        n: 1000,
        weights: vec![0.3, 0.3, 0.4],
        means: vec![0.0, 4.0, 6.0],
        variances: vec![1.0, 1.0, 1.0],
        seed: 5,
    };
    let (Dataset::Mixture { y }, truth) = generate_synthetic(&spec).unwrap() else { panic!("wrong dataset") };
    // variance of the mixture: Σw(σ² + μ²) − 3.6²
    let var = 0.3 * 1.0 + 0.3 * 17.0 + 0.4 * 37.0 - 3.6 * 3.6;
    let half_width = 3.0 * (var / 1000.0f64).sqrt();
    assert!((mean(&y) - 3.6).abs() < half_width, "mean {}", mean(&y));
    assert_eq!(truth.cardinality, 3);
}

#[test]
fn generated_regression_has_the_requested_shape() {
    let spec = GeneratorSpec::Regression { n: 50, p: 300, c0: 10, signal: 5.0, design: Design::Iid, rho: 0.5, noise_sd: 1.0, seed: 3 };
    let (Dataset::Regression { x, y }, truth) = generate_synthetic(&spec).unwrap() else { panic!("wrong dataset") };
    assert_eq!(x.shape(), (50, 300));
    assert_eq!(y.len(), 50);
    let theta = truth.theta.unwrap();
    assert_eq!(theta.iter().filter(|t| **t != 0.0).count(), 10);
    assert!(theta.iter().all(|t| *t == 0.0 || *t == 5.0));
}

#[test]
fn correlated_design_has_lag_one_correlation_one_half() {
    let spec = GeneratorSpec::Regression { n: 2000, p: 20, c0: 1, signal: 1.0, design: Design::Ar, rho: 0.5, noise_sd: 1.0, seed: 4 };
    let (Dataset::Regression { x, .. }, _) = generate_synthetic(&spec).unwrap() else { panic!("wrong dataset") };
    let col = |j: usize| x.column(j).iter().copied().collect::<Vec<f64>>();
    for j in 0..19 {
        let (a, b) = (col(j), col(j + 1));
        let (ma, mb) = (mean(&a), mean(&b));
        let cov = a.iter().zip(&b).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / (a.len() - 1) as f64;
        let corr = cov / (variance(&a) * variance(&b)).sqrt();
        // standard error of a sample correlation near 0.5 with n = 2000 is about 0.017
        assert!((corr - 0.5).abs() < 0.07, "columns {j},{}: correlation {corr}", j + 1);
    }
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_l1ball"))
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, fs::read_to_string(config_path("regression_theory")).unwrap().replace("b3 = 0.5", "b3 = 2.0")).unwrap();
    let status = binary().arg("run").arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let status = binary().arg("run").arg(tmp.path().join("missing.toml")).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let status = binary()
        .env("L1BALL_THREADS", "zero")
        .args(["run", config_path("prior_cardinality").to_str().unwrap(), "--output"])
        .arg(tmp.path().join("p"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn generate_then_metrics_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.toml");
    fs::write(&spec, "kind = \"fused\"\nrows = 3\ncols = 4\nseed = 2\n").unwrap();
    let data = tmp.path().join("data");
    let status = binary().arg("generate").arg(&spec).arg("--out").arg(&data).status().unwrap();
    assert!(status.success());
    assert!(data.join("image.csv").is_file() && data.join("truth.json").is_file());

    let config = format!(
        "model = \"fused\"\noutput_dir = {:?}\n[data]\npath = {:?}\n[prior]\nbase = {{ kind = \"laplace\", lambda = 1.0 }}\nradius = {{ kind = \"half_cauchy\", scale = 1.0 }}\n[sampler]\nchains = 1\nwarmup = 60\nsamples = 40\n",
        tmp.path().join("bundle"),
        data
    );
    let config = ExperimentConfig::from_toml(&config).unwrap();
    let bundle = run_experiment(&config).unwrap();
    assert!(bundle.metric("fpr").is_some());

    let out = binary().arg("metrics").arg(&bundle.dir).arg(data.join("truth.json")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("metric,value\nfpr,"), "{text}");

    let status = binary().arg("summarize").arg(&bundle.dir).status().unwrap();
    assert!(status.success());
    assert!(bundle.dir.join("cardinality_pmf.csv").is_file());
}
