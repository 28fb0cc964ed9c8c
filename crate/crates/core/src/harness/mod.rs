//! Experiment orchestration: single tests on a data set, power sweeps over a
//! data-generating process, and result persistence.
//!
//! An experiment is a JSON document:
//!
//! ```json
//! {
//!   "name": "normality_t",
//!   "dgp": { "dist": { "kind": "student_t_shifted", "nu": 3 }, "n": 100 },
//!   "sweep": { "param": "dgp.dist.nu", "values": [3, 5, 10] },
//!   "test": { "test": "sksd", "model": { "kind": "gaussian" },
//!             "estimator": { "kind": "mle_gaussian" }, "B": 200, "alpha": 0.05 },
//!   "replications": 200,
//!   "seed": 1
//! }
//! ```
//!
//! `sweep.param` is a dotted path into the document itself; numeric path
//! segments index arrays (`dgp.dist.theta.1`).

mod io;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::{baseline_test, BaselineKind, BaselineStatistic};
use crate::bootstrap::{neyman_sksd_test, sksd_test, BootstrapOptions, PValueConvention, TestReport};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::kernels::KernelChoice;
use crate::models::ModelSpec;
use crate::sample::SampleBatch;
use crate::samplers::{dgp_sample, DgpSpec};
use crate::seed::child_seed;

pub use io::{emit_results, load_samples_csv, parse_samples_csv, read_results_csv, write_samples_csv, CSV_HEADER};

/// Bootstrap size and replication count used unless a config says otherwise.
pub const DESK_B: usize = 200;
pub const DESK_REPLICATIONS: usize = 200;
/// Budgets of the full-scale runs.
pub const FULL_B: usize = 300;
pub const FULL_REPLICATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    #[default]
    Sksd,
    NeymanSksd,
    Ks,
    W1,
    Mmd,
    Ad,
    Lilliefors,
    Lrt,
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| {
            Error::Config(format!("unknown test `{s}` (sksd, neyman-sksd, ks, w1, mmd, ad, lilliefors, lrt)"))
        })
    }
}

fn default_b() -> usize {
    DESK_B
}
fn default_alpha() -> f64 {
    0.05
}
fn default_replications() -> usize {
    DESK_REPLICATIONS
}

/// Everything needed to run one calibrated test on a data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    #[serde(default)]
    pub test: TestKind,
    pub model: ModelSpec,
    pub estimator: EstimatorSpec,
    /// Kernel of the SKSD statistic, or of MMD.
    #[serde(default)]
    pub kernel: KernelChoice,
    #[serde(rename = "B", alias = "b", default = "default_b")]
    pub b: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub convention: PValueConvention,
    /// Monte-Carlo draws of the orthogonalized kernel; `max(10n, 100)` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_draws: Option<usize>,
    /// Model draws for MMD; `n` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mmd_draws: Option<usize>,
}

impl TestSpec {
    pub fn new(test: TestKind, model: ModelSpec, estimator: EstimatorSpec) -> Self {
        Self {
            test,
            model,
            estimator,
            kernel: KernelChoice::default(),
            b: DESK_B,
            alpha: 0.05,
            convention: PValueConvention::Paper,
            mc_draws: None,
            mmd_draws: None,
        }
    }

    pub fn options(&self, seed: u64) -> BootstrapOptions {
        BootstrapOptions { b: self.b, alpha: self.alpha, seed, convention: self.convention }
    }

    pub fn validate(&self) -> Result<()> {
        self.options(0).validate()?;
        self.model.build().map(|_| ())
    }
}

/// Runs the configured test on `samples`.
pub fn run_single_test(spec: &TestSpec, samples: &SampleBatch, seed: u64) -> Result<TestReport> {
    let family = spec.model.build()?;
    let family = family.as_ref();
    let opts = spec.options(seed);
    let baseline = |kind| {
        let b = BaselineStatistic { kind, m: spec.mmd_draws, kernel: spec.kernel };
        baseline_test(&b, family, &spec.estimator, samples, &opts)
    };
    match spec.test {
        TestKind::Sksd => sksd_test(family, &spec.estimator, &spec.kernel, samples, &opts),
        TestKind::NeymanSksd => neyman_sksd_test(family, &spec.estimator, &spec.kernel, samples, spec.mc_draws, &opts),
        TestKind::Ks => baseline(BaselineKind::Ks),
        TestKind::W1 => baseline(BaselineKind::W1),
        TestKind::Mmd => baseline(BaselineKind::Mmd),
        TestKind::Ad => baseline(BaselineKind::AndersonDarling),
        TestKind::Lilliefors => baseline(BaselineKind::Lilliefors),
        TestKind::Lrt => baseline(BaselineKind::Lrt),
    }
}

/// The swept parameter and its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Dotted path into the experiment document, for example `dgp.dist.mu`.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub dgp: DgpSpec,
    pub sweep: Sweep,
    pub test: TestSpec,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

fn set_path(doc: &mut Value, path: &str, value: f64) -> Result<()> {
    let mut cur = doc;
    for seg in path.split('.') {
        cur = match cur {
            Value::Object(map) => map.get_mut(seg),
            Value::Array(arr) => seg.parse::<usize>().ok().and_then(|i| arr.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::Config(format!("sweep path `{path}` does not exist (at `{seg}`)")))?;
    }
    *cur = if value.fract() == 0.0 && value.abs() < 9.0e15 && cur.is_u64() {
        Value::from(value as u64)
    } else {
        serde_json::Number::from_f64(value)
            .map(Value::Number)
            .ok_or_else(|| Error::Config(format!("sweep value {value} is not finite")))?
    };
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Swaps the desk-scale budgets for the full-scale ones.
    pub fn full_scale(mut self) -> Self {
        self.test.b = FULL_B;
        self.replications = FULL_REPLICATIONS;
        self
    }

    /// The configuration with the swept parameter set to `value`.
    pub fn instantiate(&self, value: f64) -> Result<(DgpSpec, TestSpec)> {
        let mut doc = serde_json::to_value(self)?;
        set_path(&mut doc, &self.sweep.param, value)?;
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        Ok((cfg.dgp, cfg.test))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        for &v in &self.sweep.values {
            let (dgp, test) = self.instantiate(v)?;
            dgp.dist.validate(dgp.n)?;
            test.validate()?;
        }
        Ok(())
    }
}

/// One (grid value, replicate) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub replicate: usize,
    /// NaN when the replicate failed.
    pub statistic: f64,
    /// NaN when the replicate failed.
    pub p_value: f64,
    pub reject: bool,
    pub theta_hat: Vec<f64>,
    pub seed: u64,
    pub elapsed_ms: f64,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.p_value.is_nan()
    }
}

/// Rejection rate at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep_value: f64,
    pub replicates: usize,
    /// Replicates whose test ran to completion.
    pub completed: usize,
    pub rejections: usize,
    /// `rejections / completed`.
    pub rejection_rate: f64,
    /// Binomial standard error of the rate.
    pub se: f64,
    /// Bootstrap resamples discarded across all replicates.
    pub bootstrap_failures: usize,
}

/// A replicate that could not be run, with its cause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub sweep_value: f64,
    pub replicate: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub aggregate: Vec<AggregateRow>,
    pub failures: Vec<ReplicateFailure>,
}

/// Seed of replicate `r`. It does not depend on the grid value, so every
/// grid point sees the same random streams.
pub fn replicate_seed(master: u64, replicate: usize) -> u64 {
    child_seed(master, replicate as u64, "replicate")
}

/// Rejection rates per grid value, in grid order.
pub fn aggregate(rows: &[ResultRow], bootstrap_failures: &[usize]) -> Vec<AggregateRow> {
    let mut out: Vec<AggregateRow> = Vec::new();
    for (row, &bf) in rows.iter().zip(bootstrap_failures.iter().chain(std::iter::repeat(&0))) {
        let idx = match out.iter().position(|a| a.sweep_value.to_bits() == row.sweep_value.to_bits()) {
            Some(i) => i,
            None => {
                out.push(AggregateRow {
                    sweep_value: row.sweep_value,
                    replicates: 0,
                    completed: 0,
                    rejections: 0,
                    rejection_rate: f64::NAN,
                    se: f64::NAN,
                    bootstrap_failures: 0,
                });
                out.len() - 1
            }
        };
        let a = &mut out[idx];
        a.replicates += 1;
        a.bootstrap_failures += bf;
        if !row.failed() {
            a.completed += 1;
            a.rejections += usize::from(row.reject);
        }
    }
    for a in &mut out {
        if a.completed > 0 {
            let p = a.rejections as f64 / a.completed as f64;
            a.rejection_rate = p;
            a.se = (p * (1.0 - p) / a.completed as f64).sqrt();
        }
    }
    out
}

/// Runs every (grid value, replicate) pair. `workers` bounds the thread
/// pool; results do not depend on it.
pub fn run_power_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let grid: Vec<(f64, DgpSpec, TestSpec)> = cfg
        .sweep
        .values
        .iter()
        .map(|&v| cfg.instantiate(v).map(|(d, t)| (v, d, t)))
        .collect::<Result<_>>()?;
    let r = cfg.replications;
    let job = |idx: usize| {
        let (value, dgp, test) = &grid[idx / r];
        let rep = idx % r;
        let seed = replicate_seed(cfg.seed, rep);
        let start = Instant::now();
        let outcome = dgp_sample(dgp, child_seed(seed, 0, "data"))
            .and_then(|x| run_single_test(test, &x, child_seed(seed, 0, "test")));
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        match outcome {
            Ok(rep_report) => (
                ResultRow {
                    sweep_value: *value,
                    replicate: rep,
                    statistic: rep_report.statistic,
                    p_value: rep_report.p_value,
                    reject: rep_report.reject,
                    theta_hat: rep_report.theta_hat,
                    seed,
                    elapsed_ms,
                },
                rep_report.failures,
                None,
            ),
            Err(e) => (
                ResultRow {
                    sweep_value: *value,
                    replicate: rep,
                    statistic: f64::NAN,
                    p_value: f64::NAN,
                    reject: false,
                    theta_hat: Vec::new(),
                    seed,
                    elapsed_ms,
                },
                0,
                Some(ReplicateFailure { sweep_value: *value, replicate: rep, error: e.to_string() }),
            ),
        }
    };
    let total = grid.len() * r;
    let run = || (0..total).into_par_iter().map(job).collect::<Vec<_>>();
    let outcomes = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut rows = Vec::with_capacity(total);
    let mut boot_failures = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for (row, bf, fail) in outcomes {
        rows.push(row);
        boot_failures.push(bf);
        failures.extend(fail);
    }
    let aggregate = aggregate(&rows, &boot_failures);
    Ok(ExperimentResult { rows, aggregate, failures })
}
