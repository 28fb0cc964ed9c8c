//! `sksd` command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage, configuration or input errors, 2 when
//! the nuisance estimator fails on the observed data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sksd::harness::{
    emit_results, load_samples_csv, run_power_experiment, run_single_test, write_samples_csv, ExperimentConfig,
    TestKind, TestSpec,
};
use sksd::samplers::{dgp_sample, DgpSpec};
use sksd::{Bandwidth, EstimatorSpec, KernelChoice, KernelKind, ModelSpec};

#[derive(Parser)]
#[command(name = "sksd", version, about = "Semiparametric kernel Stein discrepancy goodness-of-fit tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one calibrated test on a CSV data file and print a JSON report.
    Test(TestArgs),
    /// Run a power or size experiment from a JSON configuration.
    Power(PowerArgs),
    /// Draw a sample from a data-generating process and write it as CSV.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Gaussian,
    Linear,
}

#[derive(Args)]
struct TestArgs {
    /// Null family: gaussian, gaussian_location, kef[-p], or a JSON model spec.
    #[arg(long, default_value = "gaussian")]
    model: String,
    /// Estimator: mle, min-ksd, sm, min-ksd-numeric, or a JSON estimator spec.
    #[arg(long, default_value = "mle")]
    estimator: String,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelArg,
    /// `median`, `median-per-replicate`, or a positive number.
    #[arg(long, default_value = "median")]
    bandwidth: String,
    /// CSV file, one observation per row.
    #[arg(long)]
    data: PathBuf,
    /// Number of bootstrap resamples.
    #[arg(long = "B", alias = "b", default_value_t = 200)]
    b: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `paper` (#{T̃ ≥ T}/B) or `plus-one` ((1 + #{T̃ ≥ T})/(B + 1)).
    #[arg(long = "pvalue-convention", default_value = "paper")]
    pvalue_convention: String,
    /// sksd, neyman-sksd, ks, w1, mmd, ad, lilliefors or lrt.
    #[arg(long, default_value = "sksd")]
    test: String,
    /// Monte-Carlo draws for the orthogonalized kernel of neyman-sksd.
    #[arg(long)]
    mc_draws: Option<usize>,
    /// Print the report on one line.
    #[arg(long)]
    compact: bool,
}

#[derive(Args)]
struct PowerArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for `<name>.csv` and `<name>.json`.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Use B = 300 and 500 replications.
    #[arg(long)]
    full_scale: bool,
    /// Override the replication count.
    #[arg(long)]
    replications: Option<usize>,
    /// Override the number of bootstrap resamples.
    #[arg(long = "B", alias = "b")]
    b: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Distribution as JSON, inline or a path to a file, e.g. `{"kind":"student_t_shifted","nu":3}`.
    #[arg(long)]
    dist: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Reads `arg` as inline JSON, or as a path to a JSON file.
fn json_arg<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading {what} from {arg}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing {what}"))
}

fn parse_model(arg: &str) -> Result<ModelSpec> {
    if arg.trim_start().starts_with('{') || Path::new(arg).is_file() {
        json_arg(arg, "model spec")
    } else {
        Ok(ModelSpec::from_name(arg)?)
    }
}

fn parse_kernel(kind: KernelArg, bandwidth: &str) -> Result<KernelChoice> {
    let bandwidth = match bandwidth {
        "median" => Bandwidth::Median,
        "median-per-replicate" => Bandwidth::MedianPerReplicate,
        other => {
            let h: f64 = other.parse().with_context(|| format!("bandwidth `{other}` is not median or a number"))?;
            if !(h > 0.0 && h.is_finite()) {
                bail!("bandwidth must be positive, got {h}");
            }
            Bandwidth::Fixed(h)
        }
    };
    let kind = match kind {
        KernelArg::Gaussian => KernelKind::Gaussian,
        KernelArg::Linear => KernelKind::Linear,
    };
    Ok(KernelChoice { kind, bandwidth })
}

fn parse_estimator(arg: &str, kernel: KernelChoice) -> Result<EstimatorSpec> {
    if arg.trim_start().starts_with('{') || Path::new(arg).is_file() {
        return json_arg(arg, "estimator spec");
    }
    Ok(EstimatorSpec::new(arg.parse()?).with_kernel(kernel))
}

/// Failure that maps to a specific exit code.
struct Exit(u8, anyhow::Error);

fn usage(e: impl Into<anyhow::Error>) -> Exit {
    Exit(1, e.into())
}

fn cmd_test(a: &TestArgs) -> Result<(), Exit> {
    let kernel = parse_kernel(a.kernel, &a.bandwidth).map_err(usage)?;
    let mut spec = TestSpec::new(
        a.test.parse::<TestKind>().map_err(usage)?,
        parse_model(&a.model).map_err(usage)?,
        parse_estimator(&a.estimator, kernel).map_err(usage)?,
    );
    spec.kernel = kernel;
    spec.b = a.b;
    spec.alpha = a.alpha;
    spec.convention = a.pvalue_convention.parse().map_err(usage)?;
    spec.mc_draws = a.mc_draws;
    spec.validate().map_err(usage)?;
    let data = load_samples_csv(&a.data)
        .with_context(|| format!("loading {}", a.data.display()))
        .map_err(usage)?;
    let report = run_single_test(&spec, &data, a.seed).map_err(|e| {
        let code = if e.is_estimation_failure() { 2 } else { 1 };
        Exit(code, anyhow::Error::new(e).context("test failed"))
    })?;
    let json = if a.compact { serde_json::to_string(&report) } else { serde_json::to_string_pretty(&report) };
    println!("{}", json.map_err(usage)?);
    eprintln!("{}", report.summary());
    Ok(())
}

fn cmd_power(a: &PowerArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    if a.full_scale {
        cfg = cfg.full_scale();
    }
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if let Some(b) = a.b {
        cfg.test.b = b;
    }
    cfg.validate()?;
    let result = run_power_experiment(&cfg, a.workers)?;
    let (csv, json) = emit_results(&result, &cfg, &a.out)?;
    println!("{:>12}  {:>8}  {:>8}  {:>9}", cfg.sweep.param, "rate", "se", "completed");
    for row in &result.aggregate {
        println!("{:>12}  {:>8.4}  {:>8.4}  {:>5}/{}", row.sweep_value, row.rejection_rate, row.se, row.completed, row.replicates);
    }
    if !result.failures.is_empty() {
        eprintln!("{} replicate(s) failed; see {}", result.failures.len(), json.display());
    }
    eprintln!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let spec = DgpSpec::new(json_arg(&a.dist, "distribution")?, a.n);
    spec.dist.validate(a.n)?;
    let x = dgp_sample(&spec, a.seed)?;
    write_samples_csv(&x, &a.out)?;
    eprintln!("wrote {} rows to {}", x.n(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Power(a) => cmd_power(a).map_err(usage),
        Command::Simulate(a) => cmd_simulate(a).map_err(usage),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
