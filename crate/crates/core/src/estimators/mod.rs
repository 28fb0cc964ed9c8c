//! Nuisance-parameter estimators: Gaussian MLE, closed-form minimum-KSD and
//! score matching for families with affine scores, and a simplex search on
//! the KSD objective for everything else.

pub mod nelder_mead;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Bandwidth, KernelChoice, KernelSpec};
use crate::models::{affine_score_decomposition, AffineScoreDecomposition, ModelFamily};
use crate::sample::SampleBatch;
use crate::stein::{gaussian_gram, v_statistic};

pub use crate::models::project_to_domain;
use crate::models::SIGMA_FLOOR;
use nelder_mead::{minimize, NelderMeadOptions};

/// Largest accepted condition number of a normal-equation matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// A map from samples to a parameter in the family's domain.
pub trait Estimator: Send + Sync {
    fn estimate(&self, family: &dyn ModelFamily, samples: &SampleBatch) -> Result<Vec<f64>>;
}

impl<F> Estimator for F
where
    F: Fn(&dyn ModelFamily, &SampleBatch) -> Result<Vec<f64>> + Send + Sync,
{
    fn estimate(&self, family: &dyn ModelFamily, samples: &SampleBatch) -> Result<Vec<f64>> {
        self(family, samples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    MleGaussian,
    MinKsdClosed,
    ScoreMatchingClosed,
    MinKsdNumeric,
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    /// Accepts the JSON names and the short forms `mle`, `min-ksd`, `sm` and
    /// `min-ksd-numeric`.
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "mle" | "mle_gaussian" => Ok(Self::MleGaussian),
            "min_ksd" | "min_ksd_closed" => Ok(Self::MinKsdClosed),
            "sm" | "score_matching" | "score_matching_closed" => Ok(Self::ScoreMatchingClosed),
            "min_ksd_numeric" => Ok(Self::MinKsdNumeric),
            _ => Err(Error::Config(format!("unknown estimator `{s}` (mle, min-ksd, sm, min-ksd-numeric)"))),
        }
    }
}

fn default_max_iter() -> usize {
    2000
}
fn default_tolerance() -> f64 {
    1e-8
}

/// Serializable estimator description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Kernel of the KSD objective; ignored by MLE and score matching.
    #[serde(default)]
    pub kernel: KernelChoice,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Starting point of the simplex search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        Self { kind, kernel: KernelChoice::default(), max_iter: default_max_iter(), tolerance: default_tolerance(), init: None }
    }

    pub fn with_kernel(mut self, kernel: KernelChoice) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn uses_kernel(&self) -> bool {
        matches!(self.kind, EstimatorKind::MinKsdClosed | EstimatorKind::MinKsdNumeric)
    }

    /// Fixes a median-heuristic bandwidth on `observed`, so that the same
    /// estimator is applied to the data and to every bootstrap resample.
    pub fn freeze(&self, observed: &SampleBatch) -> Result<Self> {
        let mut out = self.clone();
        if self.uses_kernel() && self.kernel.bandwidth == Bandwidth::Median {
            if let KernelSpec::Gaussian { bandwidth } = self.kernel.resolve(observed)? {
                out.kernel.bandwidth = Bandwidth::Fixed(bandwidth);
            }
        }
        Ok(out)
    }
}

impl Estimator for EstimatorSpec {
    fn estimate(&self, family: &dyn ModelFamily, samples: &SampleBatch) -> Result<Vec<f64>> {
        match self.kind {
            EstimatorKind::MleGaussian => mle(family, samples),
            EstimatorKind::MinKsdClosed => min_ksd_closed_form(family, &self.kernel.resolve(samples)?, samples),
            EstimatorKind::ScoreMatchingClosed => score_matching_closed_form(family, samples),
            EstimatorKind::MinKsdNumeric => {
                let spec = self.kernel.resolve(samples)?;
                let opts = NelderMeadOptions { max_iter: self.max_iter, tolerance: self.tolerance, ..Default::default() };
                min_ksd_numeric(family, &spec, samples, self.init.as_deref(), &opts).map(|fit| fit.theta)
            }
        }
    }
}

/// `(μ̂, σ̂)` with the divisor-n variance; σ̂ is floored at 1e-8.
pub fn mle_gaussian(samples: &SampleBatch) -> Result<(f64, f64)> {
    if samples.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: samples.dim() });
    }
    let n = samples.n();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let xs = samples.as_flat();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(Error::DegenerateSample("zero sample variance".into()));
    }
    Ok((mean, var.sqrt().max(SIGMA_FLOOR)))
}

fn mle(family: &dyn ModelFamily, samples: &SampleBatch) -> Result<Vec<f64>> {
    match family.name() {
        "gaussian" => mle_gaussian(samples).map(|(m, s)| vec![m, s]),
        "gaussian_location" => {
            if samples.dim() != family.data_dim() {
                return Err(Error::DimensionMismatch { expected: family.data_dim(), got: samples.dim() });
            }
            if samples.is_empty() {
                return Err(Error::TooFewSamples { needed: 1, got: 0 });
            }
            Ok((0..samples.dim()).map(|j| samples.column(j).iter().sum::<f64>() / samples.n() as f64).collect())
        }
        other => Err(Error::Unsupported { model: other.to_string(), what: "maximum likelihood" }),
    }
}

fn decompositions(family: &dyn ModelFamily, samples: &SampleBatch) -> Result<Vec<AffineScoreDecomposition>> {
    if samples.dim() != family.data_dim() {
        return Err(Error::DimensionMismatch { expected: family.data_dim(), got: samples.dim() });
    }
    samples.rows().map(|x| affine_score_decomposition(family, x)).collect()
}

/// Normal equations `(Q, c)` of the KSD objective for an affine family:
/// `n²·V(θ) = θᵀQθ + 2cᵀθ + const`.
pub fn ksd_normal_equations(
    family: &dyn ModelFamily,
    spec: &KernelSpec,
    samples: &SampleBatch,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    spec.validate()?;
    let parts = decompositions(family, samples)?;
    let n = samples.n();
    let d = samples.dim();
    let k = family.param_dim();
    let gram = match *spec {
        KernelSpec::Gaussian { bandwidth } => gaussian_gram(bandwidth, samples),
        KernelSpec::Linear => {
            let x = DMatrix::from_row_slice(n, d, samples.as_flat());
            &x * x.transpose()
        }
    };
    let mut q = DMatrix::zeros(k, k);
    let mut c = DVector::zeros(k);
    for a in 0..d {
        // Row i of U holds J(x_i)[a, :].
        let u = DMatrix::from_fn(n, k, |i, l| parts[i].j[(a, l)]);
        let b = DVector::from_fn(n, |j, _| parts[j].b[a]);
        // g[i] = Σ_j ∂K(x_i, x_j)/∂y_a
        let g = match *spec {
            KernelSpec::Gaussian { bandwidth } => {
                let h2 = bandwidth * bandwidth;
                DVector::from_fn(n, |i, _| {
                    let xi = samples.row(i)[a];
                    (0..n).map(|j| (xi - samples.row(j)[a]) * gram[(i, j)]).sum::<f64>() / h2
                })
            }
            KernelSpec::Linear => DVector::from_fn(n, |i, _| n as f64 * samples.row(i)[a]),
        };
        let ku = &gram * &u;
        q += u.transpose() * ku;
        c += u.transpose() * (&gram * b + g);
    }
    // Symmetrize away rounding.
    let q = (&q + q.transpose()) * 0.5;
    Ok((q, c))
}

/// Solves `Qθ = rhs` after checking the spectral condition number.
fn guarded_solve(q: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if q.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    if q.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("normal equations"));
    }
    let eig = SymmetricEigen::new(q.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    q.clone().full_piv_lu().solve(rhs).ok_or(Error::SingularSystem { condition })
}

/// Minimum-KSD estimate `θ̂ = −Q⁻¹c`, clamped to the parameter box.
pub fn min_ksd_closed_form(family: &dyn ModelFamily, spec: &KernelSpec, samples: &SampleBatch) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let (q, c) = ksd_normal_equations(family, spec, samples)?;
    let theta = guarded_solve(&q, &(-c))?;
    Ok(project_to_domain(family, theta.as_slice()))
}

/// Score-matching estimate
/// `θ̂ = −(Σ J_iᵀJ_i)⁻¹ Σ (∇_θ div s(x_i) + J_iᵀ b_i)`, clamped to the box.
pub fn score_matching_closed_form(family: &dyn ModelFamily, samples: &SampleBatch) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let parts = decompositions(family, samples)?;
    let k = family.param_dim();
    let mut q = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for p in &parts {
        q += p.j.transpose() * &p.j;
        rhs += p.j.transpose() * DVector::from_column_slice(&p.b) + DVector::from_column_slice(&p.divergence_grad);
    }
    let theta = guarded_solve(&q, &(-rhs))?;
    Ok(project_to_domain(family, theta.as_slice()))
}

/// Result of the simplex search.
#[derive(Debug, Clone)]
pub struct NumericFit {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// False when `max_iter` ran out before the simplex collapsed.
    pub converged: bool,
}

/// Minimizes the V-statistic over θ by Nelder–Mead.
///
/// Points outside the box are evaluated at their projection plus the squared
/// distance to it, so the search stays well defined near the boundary. The
/// starting point defaults to the closed form for affine families and to
/// [`ModelFamily::initial_guess`] otherwise.
pub fn min_ksd_numeric(
    family: &dyn ModelFamily,
    spec: &KernelSpec,
    samples: &SampleBatch,
    init: Option<&[f64]>,
    opts: &NelderMeadOptions,
) -> Result<NumericFit> {
    let start = match init {
        Some(t) => t.to_vec(),
        None if family.affine_parts(samples.row(0)).is_some() => {
            min_ksd_closed_form(family, spec, samples).unwrap_or_else(|_| family.initial_guess(samples))
        }
        None => family.initial_guess(samples),
    };
    if start.len() != family.param_dim() {
        return Err(Error::DimensionMismatch { expected: family.param_dim(), got: start.len() });
    }
    let objective = |theta: &[f64]| {
        let p = project_to_domain(family, theta);
        let penalty: f64 = p.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum();
        v_statistic(family, &p, spec, samples).map_or(f64::INFINITY, |s| s.value + penalty)
    };
    let start_value = objective(&start);
    if !start_value.is_finite() {
        return Err(Error::Estimation(format!("objective is not finite at the initial point {start:?}")));
    }
    let m = minimize(objective, &start, opts);
    Ok(NumericFit {
        theta: project_to_domain(family, &m.x),
        objective: m.value,
        iterations: m.iterations,
        converged: m.converged,
    })
}
