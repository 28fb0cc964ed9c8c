//! Scalar positive-definite kernels on ℝ^d and the derivative quantities
//! the Stein kernel needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
    Linear,
}

/// A fully resolved kernel: `exp(−‖x−y‖²/(2h²))` or `xᵀy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Gaussian { bandwidth: f64 },
    Linear,
}

/// Value and derivatives of a kernel at one pair of points.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrads {
    pub value: f64,
    /// ∇ₓK(x, y)
    pub gx: Vec<f64>,
    /// ∇_yK(x, y)
    pub gy: Vec<f64>,
    /// Tr(∇ₓ∇_yK(x, y))
    pub trace: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidParameter(format!("gaussian bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KernelSpec::Gaussian { bandwidth })
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::Gaussian { .. } => KernelKind::Gaussian,
            KernelSpec::Linear => KernelKind::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { bandwidth } => Self::gaussian(bandwidth).map(|_| ()),
            KernelSpec::Linear => Ok(()),
        }
    }

    /// K(x, y) without input checks.
    #[inline]
    pub fn value_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                let r2 = sq_dist(x, y);
                (-r2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelSpec::Linear => dot(x, y),
        }
    }

    /// Writes ∇_yK(x, y) into `out` and returns K(x, y).
    #[inline]
    pub fn grad_y_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                let h2 = bandwidth * bandwidth;
                let k = (-sq_dist(x, y) / (2.0 * h2)).exp();
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = (a - b) * k / h2;
                }
                k
            }
            KernelSpec::Linear => {
                out.copy_from_slice(x);
                dot(x, y)
            }
        }
    }
}

pub(crate) fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("points must have dimension ≥ 1".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel input"));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_pair(x, y)?;
    Ok(spec.value_unchecked(x, y))
}

pub fn kernel_grads(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<KernelGrads> {
    spec.validate()?;
    check_pair(x, y)?;
    let d = x.len() as f64;
    Ok(match *spec {
        KernelSpec::Gaussian { bandwidth } => {
            let h2 = bandwidth * bandwidth;
            let r2 = sq_dist(x, y);
            let k = (-r2 / (2.0 * h2)).exp();
            let gy: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - b) * k / h2).collect();
            let gx = gy.iter().map(|v| -v).collect();
            KernelGrads { value: k, gx, gy, trace: (d / h2 - r2 / (h2 * h2)) * k }
        }
        KernelSpec::Linear => KernelGrads { value: dot(x, y), gx: y.to_vec(), gy: x.to_vec(), trace: d },
    })
}

/// Median of the pairwise Euclidean distances (lower median for an even
/// number of pairs).
pub fn median_heuristic(samples: &SampleBatch) -> Result<f64> {
    let n = samples.n();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = samples.row(i);
        for j in (i + 1)..n {
            dists.push(sq_dist(xi, samples.row(j)).sqrt());
        }
    }
    let mid = (dists.len() - 1) / 2;
    let (_, med, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let med = *med;
    if med > 0.0 {
        return Ok(med);
    }
    // More than half the pairs coincide; fall back to the smallest positive
    // distance if there is one.
    dists
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::DegenerateSample("all points identical; median-heuristic bandwidth is zero".into()))
}

/// How the Gaussian bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median heuristic on the observed sample, reused for every resample.
    Median,
    /// Median heuristic recomputed on each resample.
    MedianPerReplicate,
    Fixed(f64),
}

/// A kernel family plus a bandwidth rule, resolved against data by
/// [`KernelChoice::resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelChoice {
    pub kind: KernelKind,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: Bandwidth,
}

fn default_bandwidth() -> Bandwidth {
    Bandwidth::Median
}

impl Default for KernelChoice {
    fn default() -> Self {
        Self { kind: KernelKind::Gaussian, bandwidth: Bandwidth::Median }
    }
}

impl KernelChoice {
    pub fn gaussian_median() -> Self {
        Self::default()
    }

    pub fn linear() -> Self {
        Self { kind: KernelKind::Linear, bandwidth: Bandwidth::Median }
    }

    pub fn fixed(spec: KernelSpec) -> Self {
        match spec {
            KernelSpec::Gaussian { bandwidth } => {
                Self { kind: KernelKind::Gaussian, bandwidth: Bandwidth::Fixed(bandwidth) }
            }
            KernelSpec::Linear => Self::linear(),
        }
    }

    pub fn resolve(&self, samples: &SampleBatch) -> Result<KernelSpec> {
        match self.kind {
            KernelKind::Linear => Ok(KernelSpec::Linear),
            KernelKind::Gaussian => match self.bandwidth {
                Bandwidth::Fixed(h) => KernelSpec::gaussian(h),
                Bandwidth::Median | Bandwidth::MedianPerReplicate => KernelSpec::gaussian(median_heuristic(samples)?),
            },
        }
    }

    /// True when resamples must re-run the bandwidth rule.
    pub fn per_replicate(&self) -> bool {
        self.kind == KernelKind::Gaussian && self.bandwidth == Bandwidth::MedianPerReplicate
    }
}
