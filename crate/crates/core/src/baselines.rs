//! One-dimensional distance baselines, all calibrated by the parametric
//! bootstrap: Kolmogorov–Smirnov, Wasserstein-1, MMD, Anderson–Darling,
//! Lilliefors and a likelihood-ratio statistic.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_calibrate, BootstrapOptions, TestReport};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::kernels::{KernelChoice, KernelSpec};
use crate::models::ModelFamily;
use crate::sample::SampleBatch;
use crate::special::normal_cdf;

/// Clamp applied to probabilities before taking logs.
pub const AD_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Ks,
    W1,
    Mmd,
    AndersonDarling,
    Lilliefors,
    Lrt,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Ks => "ks",
            BaselineKind::W1 => "w1",
            BaselineKind::Mmd => "mmd",
            BaselineKind::AndersonDarling => "anderson_darling",
            BaselineKind::Lilliefors => "lilliefors",
            BaselineKind::Lrt => "lrt",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown baseline `{s}`")))
    }
}

/// A baseline statistic with its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineStatistic {
    pub kind: BaselineKind,
    /// Model draws for MMD; defaults to the sample size.
    #[serde(default)]
    pub m: Option<usize>,
    /// MMD kernel; the median heuristic is resolved once on observed data.
    #[serde(default)]
    pub kernel: KernelChoice,
}

impl BaselineStatistic {
    pub fn new(kind: BaselineKind) -> Self {
        Self { kind, m: None, kernel: KernelChoice::default() }
    }
}

fn scalars(samples: &SampleBatch) -> Result<Vec<f64>> {
    if samples.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: samples.dim() });
    }
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(samples.as_flat().to_vec())
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Kolmogorov–Smirnov distance between the empirical CDF and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let x = sorted(samples)?;
    let n = x.len() as f64;
    Ok(x.iter().enumerate().fold(0.0f64, |d, (i, &xi)| {
        let f = cdf(xi);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// Wasserstein-1 distance between two equal-size empirical measures by
/// sorted matching.
pub fn w1_statistic(samples: &[f64], model_draws: &[f64]) -> Result<f64> {
    if samples.len() != model_draws.len() {
        return Err(Error::DimensionMismatch { expected: samples.len(), got: model_draws.len() });
    }
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let (x, y) = (sorted(samples)?, sorted(model_draws)?);
    Ok(x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64)
}

/// Biased (V-form) squared MMD, diagonals included.
pub fn mmd_v_statistic(x: &SampleBatch, y: &SampleBatch, spec: &KernelSpec) -> Result<f64> {
    spec.validate()?;
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mean = |a: &SampleBatch, b: &SampleBatch| {
        let s: f64 = a.rows().map(|u| b.rows().map(|v| spec.value_unchecked(u, v)).sum::<f64>()).sum();
        s / (a.n() * b.n()) as f64
    };
    Ok(mean(x, x) + mean(y, y) - 2.0 * mean(x, y))
}

/// Anderson–Darling `A²` for `u_(i) = F(x_(i))`.
pub fn anderson_darling_from_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let u: Vec<f64> = sorted(samples)?.into_iter().map(|x| cdf(x).clamp(AD_CLAMP, 1.0 - AD_CLAMP)).collect();
    let n = u.len();
    let s: f64 = (0..n).map(|i| (2 * i + 1) as f64 * (u[i].ln() + (1.0 - u[n - 1 - i]).ln())).sum();
    Ok(-(n as f64) - s / n as f64)
}

/// Anderson–Darling `A²` against `N(μ, σ²)`.
pub fn anderson_darling_statistic(samples: &[f64], mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("σ must be positive, got {sigma}")));
    }
    anderson_darling_from_cdf(samples, |x| normal_cdf((x - mu) / sigma))
}

/// Mean and unbiased standard deviation.
fn mean_sd(xs: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::DegenerateSample("zero variance".into()));
    }
    Ok((mean, var.sqrt()))
}

/// KS distance to the normal fitted with the sample mean and unbiased variance.
pub fn lilliefors_statistic(samples: &[f64]) -> Result<f64> {
    let (mean, sd) = mean_sd(samples)?;
    ks_statistic(samples, |x| normal_cdf((x - mean) / sd))
}

/// Average log-ratio of a leave-one-out Gaussian KDE (Silverman bandwidth)
/// to the fitted model density. Large values favour the nonparametric fit.
pub fn lrt_statistic(family: &dyn ModelFamily, theta: &[f64], samples: &[f64]) -> Result<f64> {
    let (_, sd) = mean_sd(samples)?;
    let n = samples.len();
    let h = 1.06 * sd * (n as f64).powf(-0.2);
    let norm = ((n - 1) as f64 * h * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let mut total = 0.0;
    for (i, &xi) in samples.iter().enumerate() {
        // Log-sum-exp over j ≠ i.
        let e: Vec<f64> = samples
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &xj)| -0.5 * ((xi - xj) / h).powi(2))
            .collect();
        let mx = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let kde = mx + e.iter().map(|v| (v - mx).exp()).sum::<f64>().ln() - norm;
        let model = family
            .logpdf(theta, &[xi])
            .ok_or_else(|| Error::Unsupported { model: family.name().into(), what: "a normalized log-density" })?;
        total += kde - model;
    }
    Ok(total / n as f64)
}

fn model_cdf<'a>(family: &'a dyn ModelFamily, theta: &[f64]) -> Result<impl Fn(f64) -> f64 + 'a> {
    if family.cdf(theta, 0.0).is_none() {
        return Err(Error::Unsupported { model: family.name().into(), what: "a CDF" });
    }
    let theta = theta.to_vec();
    Ok(move |x| family.cdf(&theta, x).unwrap_or(f64::NAN))
}

impl BaselineStatistic {
    /// Evaluates the statistic at θ. `kernel` must already be resolved for
    /// MMD; `seed` drives the model draws of W1 and MMD.
    pub fn evaluate(
        &self,
        family: &dyn ModelFamily,
        theta: &[f64],
        samples: &SampleBatch,
        kernel: &KernelSpec,
        seed: u64,
    ) -> Result<f64> {
        match self.kind {
            BaselineKind::Mmd => {
                let y = family.sample(theta, self.m.unwrap_or(samples.n()), seed)?;
                mmd_v_statistic(samples, &y, kernel)
            }
            BaselineKind::Ks => ks_statistic(&scalars(samples)?, model_cdf(family, theta)?),
            BaselineKind::AndersonDarling => anderson_darling_from_cdf(&scalars(samples)?, model_cdf(family, theta)?),
            BaselineKind::W1 => {
                let x = scalars(samples)?;
                let y = family.sample(theta, x.len(), seed)?;
                w1_statistic(&x, y.as_flat())
            }
            BaselineKind::Lilliefors => lilliefors_statistic(&scalars(samples)?),
            BaselineKind::Lrt => lrt_statistic(family, theta, &scalars(samples)?),
        }
    }
}

/// Bootstrap-calibrated test for a baseline statistic.
pub fn baseline_test(
    baseline: &BaselineStatistic,
    family: &dyn ModelFamily,
    estimator: &dyn Estimator,
    samples: &SampleBatch,
    opts: &BootstrapOptions,
) -> Result<TestReport> {
    let kernel = match baseline.kind {
        BaselineKind::Mmd => baseline.kernel.resolve(samples)?,
        _ => KernelSpec::Linear,
    };
    let mut report = bootstrap_calibrate(
        baseline.kind.name(),
        |theta, x, seed| baseline.evaluate(family, theta, x, &kernel, seed),
        family,
        estimator,
        samples,
        opts,
    )?;
    if let KernelSpec::Gaussian { bandwidth } = kernel {
        report.bandwidth = Some(bandwidth);
    }
    Ok(report)
}
