use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use l1ball_cli::data::{read_json, write_json, TRUTH_FILE};
use l1ball_cli::metrics::{metric_rows, render_metrics_csv};
use l1ball_cli::run::read_summary;
use l1ball_cli::{generate_synthetic, run_experiment, CliError, ExperimentConfig, GeneratorSpec, Result, Truth};

/// Experiments with l1-ball priors.
#[derive(Parser)]
#[command(name = "l1ball", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its result bundle.
    Run {
        config: PathBuf,
        /// Write the bundle here instead of the config's output_dir.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write synthetic data and truth.json from a generator spec.
    Generate {
        spec: PathBuf,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Print a bundle's summary and write plot-ready CSVs next to it.
    Summarize { bundle: PathBuf },
    /// Print support-recovery metrics of a bundle against a truth file.
    Metrics { bundle: PathBuf, truth: PathBuf },
}

fn run(config: &Path, output: Option<PathBuf>) -> Result<()> {
    let mut config = ExperimentConfig::load(config)?;
    if let Some(dir) = output {
        config.output_dir = dir;
    }
    let bundle = run_experiment(&config)?;
    println!("wrote {}", bundle.dir.display());
    for (name, value) in &bundle.metrics {
        println!("{name} = {value}");
    }
    if bundle.diagnostics.passed {
        Ok(())
    } else {
        Err(CliError::Diagnostics(bundle.diagnostics.failures.join("; ")))
    }
}

fn generate(spec: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec).map_err(|source| CliError::Io { path: spec.into(), source })?;
    let spec: GeneratorSpec = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let (data, truth) = generate_synthetic(&spec)?;
    data.write(out)?;
    write_json(&out.join(TRUTH_FILE), &truth)?;
    println!("wrote {} data to {}", spec.model(), out.display());
    Ok(())
}

fn summarize(bundle: &Path) -> Result<()> {
    let s = read_summary(bundle)?;
    let p = &s.posterior;
    println!("model            {}", s.model);
    println!("draws            {}", p.n_samples);
    println!("frechet draw     {}", p.frechet_index);
    println!("frechet support  {}", s.selection_support.iter().filter(|&&b| b).count());
    println!("cardinality mode {}", s.cardinality_mode);
    println!("top {:.0}% region  {} draws, log kernel >= {}", 100.0 * (1.0 - p.alpha), p.n_in_region, p.kappa_alpha);
    let mut pmf = String::from("cardinality,probability\n");
    for (k, v) in p.cardinality_pmf.iter().enumerate() {
        pmf.push_str(&format!("{k},{v:?}\n"));
    }
    let mut zeros = String::from("index,zero_probability\n");
    for (j, v) in p.zero_prob_map.iter().enumerate() {
        zeros.push_str(&format!("{},{v:?}\n", j + 1));
    }
    for (name, text) in [("cardinality_pmf.csv", pmf), ("zero_probability.csv", zeros)] {
        let path = bundle.join(name);
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(())
}

fn metrics(bundle: &Path, truth: &Path) -> Result<()> {
    let summary = read_summary(bundle)?;
    let truth: Truth = read_json(truth)?;
    print!("{}", render_metrics_csv(&metric_rows(&summary, &truth, None)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output } => run(&config, output),
        Command::Generate { spec, out } => generate(&spec, &out),
        Command::Summarize { bundle } => summarize(&bundle),
        Command::Metrics { bundle, truth } => metrics(&bundle, &truth),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
