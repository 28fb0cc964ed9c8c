use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution as _, Open01, StandardNormal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use super::{gibbs_conditional_gaussian, ChainConfig};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::sample::SampleBatch;
use crate::seed::child_rng;

/// Bounded tilt shapes for the multiplicative local alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltShape {
    Cos,
    Tanh,
}

/// `h(x) = amplitude · shape(frequency · (x − μ0) / σ0)`, so `|h| ≤ |amplitude|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tilt {
    pub shape: TiltShape,
    pub amplitude: f64,
    #[serde(default = "unit")]
    pub frequency: f64,
}

impl Tilt {
    fn eval(&self, z: f64) -> f64 {
        let t = self.frequency * z;
        self.amplitude
            * match self.shape {
                TiltShape::Cos => t.cos(),
                TiltShape::Tanh => t.tanh(),
            }
    }
}

/// Adjacent-node interaction magnitudes for the ring model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RingWeights {
    Constant(f64),
    Explicit(Vec<f64>),
    /// `w_i ~ U[low, high]`, drawn once from `seed` (not from the replicate seed),
    /// so every replicate shares the same graph.
    Uniform { low: f64, high: f64, seed: u64 },
}

impl RingWeights {
    fn resolve(&self, d: usize) -> Result<Vec<f64>> {
        let w = match self {
            RingWeights::Constant(v) => vec![*v; d],
            RingWeights::Explicit(v) if v.len() == d => v.clone(),
            RingWeights::Explicit(v) => return Err(Error::DimensionMismatch { expected: d, got: v.len() }),
            RingWeights::Uniform { low, high, seed } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(Error::InvalidParameter(format!("invalid weight range [{low}, {high}]")));
                }
                let mut rng = child_rng(*seed, 0, "ring-weights");
                let u = Uniform::new_inclusive(*low, *high).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                (0..d).map(|_| u.sample(&mut rng)).collect()
            }
        };
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("ring weights must be finite and non-negative".into()));
        }
        Ok(w)
    }
}

fn unit() -> f64 {
    1.0
}
fn zero() -> f64 {
    0.0
}
fn default_weights() -> RingWeights {
    RingWeights::Constant(2.0)
}
fn two() -> f64 {
    2.0
}
fn minus_half() -> f64 {
    -0.5
}

/// The data-generating processes used in the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    /// `N(μ, 1)`.
    GaussianShift { mu: f64 },
    /// Student-t with `ν` degrees of freedom shifted by `10/(ν+1)`.
    StudentTShifted { nu: f64 },
    /// `w·N(0,1) + (1−w)·N(δ, (1+δ)²)`.
    GaussianMixture { w: f64, delta: f64 },
    /// Density `∝ x^{α−1} exp(−(x−s)²/2)` on `x > 0`.
    GeneralizedChi2 {
        alpha: f64,
        #[serde(default = "zero")]
        shift: f64,
    },
    /// Density `∝ p0(x)(1 + h(x)/√n)` with `p0 = N(μ0, σ0²)` and a bounded tilt `h`.
    MultLocalAlt {
        tilt: Tilt,
        #[serde(default = "zero")]
        mu0: f64,
        #[serde(default = "unit")]
        sigma0: f64,
    },
    /// `(1 − γ/√n)·N(μ0, σ0²) + (γ/√n)·N(g_mean, g_var)`.
    AddLocalAlt {
        gamma: f64,
        #[serde(default = "zero")]
        mu0: f64,
        #[serde(default = "unit")]
        sigma0: f64,
        g_mean: f64,
        g_var: f64,
    },
    /// Draws from a member of a model family.
    ModelFamily { model: ModelSpec, theta: Vec<f64> },
    /// Conditional Gaussian on a ring with weights `w` between neighbours and
    /// extra interactions `−ε/100` between nodes two steps apart.
    ConditionalGaussianRing {
        dim: usize,
        #[serde(default = "default_weights")]
        weights: RingWeights,
        epsilon: f64,
        #[serde(default = "two")]
        gamma1: f64,
        #[serde(default = "minus_half")]
        gamma2: f64,
        #[serde(default)]
        chain: ChainConfig,
    },
}

/// A distribution together with the sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub dist: Distribution,
    pub n: usize,
}

impl DgpSpec {
    pub fn new(dist: Distribution, n: usize) -> Self {
        Self { dist, n }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

impl Distribution {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Distribution::GaussianShift { mu } => check(mu.is_finite(), || "μ must be finite".into()),
            Distribution::StudentTShifted { nu } => check(nu.is_finite() && nu > 0.0, || format!("ν must be positive, got {nu}")),
            Distribution::GaussianMixture { w, delta } => {
                check((0.0..=1.0).contains(&w), || format!("mixture weight must lie in [0, 1], got {w}"))?;
                check(delta.is_finite() && delta > -1.0, || format!("δ must exceed −1, got {delta}"))
            }
            Distribution::GeneralizedChi2 { alpha, shift } => {
                check(alpha.is_finite() && alpha > 0.0, || format!("α must be positive, got {alpha}"))?;
                check(shift.is_finite() && shift >= 0.0, || format!("shift must be non-negative, got {shift}"))
            }
            Distribution::MultLocalAlt { tilt, mu0, sigma0 } => {
                check(mu0.is_finite() && sigma0 > 0.0, || "invalid base Gaussian".into())?;
                check(tilt.amplitude.is_finite() && tilt.frequency.is_finite(), || "tilt must be finite".into())?;
                check(tilt.amplitude.abs() <= (n as f64).sqrt(), || {
                    format!("tilt amplitude {} exceeds √n; the density would be negative", tilt.amplitude)
                })
            }
            Distribution::AddLocalAlt { gamma, mu0, sigma0, g_mean, g_var } => {
                check(gamma >= 0.0 && gamma <= (n as f64).sqrt(), || format!("γ must lie in [0, √n], got {gamma}"))?;
                check(mu0.is_finite() && sigma0 > 0.0, || "invalid base Gaussian".into())?;
                check(g_mean.is_finite() && g_var > 0.0, || "invalid contaminating Gaussian".into())
            }
            Distribution::ModelFamily { .. } => Ok(()),
            Distribution::ConditionalGaussianRing { dim, epsilon, gamma2, .. } => {
                check(dim >= 3, || format!("the ring needs at least 3 nodes, got {dim}"))?;
                check(epsilon.is_finite() && epsilon >= 0.0, || format!("ε must be non-negative, got {epsilon}"))?;
                check(gamma2 < 0.0, || format!("γ2 must be negative, got {gamma2}"))
            }
        }
    }
}

/// Interaction matrix of the ring DGP.
pub fn ring_sigma(dim: usize, weights: &[f64], epsilon: f64) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let j = (i + 2) % dim;
        let k = (i + dim - 2) % dim;
        for m in [j, k] {
            if m != i {
                s[(i, m)] = -0.01 * epsilon;
            }
        }
    }
    // Adjacent edges take precedence where reach-2 pairs coincide with them.
    for i in 0..dim {
        let prev = (i + dim - 1) % dim;
        s[(i, prev)] = -weights[i];
        s[(prev, i)] = -weights[i];
    }
    s
}

/// Inverse-CDF sampler for the generalized χ² law on a tabulated grid.
///
/// For `α ≥ 1` the grid is uniform in `x` on `(0, s+12]`; for `α < 1` it is
/// uniform in `u = x^α`, which removes the integrable singularity at 0.
#[derive(Debug, Clone)]
pub struct GenChi2Sampler {
    power: f64,
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl GenChi2Sampler {
    const NODES: usize = 8192;

    pub fn new(alpha: f64, shift: f64) -> Result<Self> {
        Distribution::GeneralizedChi2 { alpha, shift }.validate(1)?;
        let upper = shift + 12.0;
        // Work in t with x = t^power.
        let power = if alpha < 1.0 { 1.0 / alpha } else { 1.0 };
        let t_max = upper.powf(1.0 / power);
        let nodes: Vec<f64> = (0..Self::NODES).map(|i| t_max * i as f64 / (Self::NODES - 1) as f64).collect();
        // Log-density in t, up to a constant.
        let log_dens = |t: f64| {
            let x = t.powf(power);
            let power_term = if power == 1.0 && alpha != 1.0 { (alpha - 1.0) * x.ln() } else { 0.0 };
            power_term - 0.5 * (x - shift).powi(2)
        };
        let logs: Vec<f64> = nodes.iter().map(|&t| if t == 0.0 && alpha > 1.0 { f64::NEG_INFINITY } else { log_dens(t) }).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let mut cdf = Vec::with_capacity(Self::NODES);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in dens.windows(2) {
            acc += 0.5 * (w[0] + w[1]);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self { power, nodes, cdf })
    }

    /// Maps `v ∈ (0, 1)` to a draw by linear interpolation of the tabulated CDF.
    pub fn quantile(&self, v: f64) -> f64 {
        let k = self.cdf.partition_point(|c| *c < v).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let frac = if c1 > c0 { (v - c0) / (c1 - c0) } else { 0.5 };
        let t = self.nodes[k - 1] + frac * (self.nodes[k] - self.nodes[k - 1]);
        // Never return exactly zero.
        t.max(f64::MIN_POSITIVE).powf(self.power).max(f64::MIN_POSITIVE)
    }
}

/// Draws `spec.n` observations; a pure function of `(spec, seed)`.
pub fn dgp_sample(spec: &DgpSpec, seed: u64) -> Result<SampleBatch> {
    let n = spec.n;
    spec.dist.validate(n)?;
    let normal = |stream| {
        let mut rng = child_rng(seed, 0, stream);
        move || -> f64 { StandardNormal.sample(&mut rng) }
    };
    let xs: Vec<f64> = match &spec.dist {
        Distribution::GaussianShift { mu } => {
            let mut z = normal("normal");
            (0..n).map(|_| mu + z()).collect()
        }
        Distribution::StudentTShifted { nu } => {
            let t = StudentT::new(*nu).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let mut rng = child_rng(seed, 0, "student-t");
            let shift = 10.0 / (nu + 1.0);
            (0..n).map(|_| t.sample(&mut rng) + shift).collect()
        }
        Distribution::GaussianMixture { w, delta } => {
            // Component labels come from their own stream so that w = 1
            // reproduces the Gaussian branch exactly.
            let mut z = normal("normal");
            let mut pick = child_rng(seed, 0, "component");
            (0..n)
                .map(|_| {
                    let u: f64 = pick.random();
                    let v = z();
                    if u < *w {
                        v
                    } else {
                        delta + (1.0 + delta) * v
                    }
                })
                .collect()
        }
        Distribution::GeneralizedChi2 { alpha, shift } => {
            let sampler = GenChi2Sampler::new(*alpha, *shift)?;
            let mut rng = child_rng(seed, 0, "uniform");
            (0..n).map(|_| sampler.quantile(rng.sample(Open01))).collect()
        }
        Distribution::MultLocalAlt { tilt, mu0, sigma0 } => {
            let root_n = (n as f64).sqrt();
            let envelope = 1.0 + tilt.amplitude.abs() / root_n;
            let mut z = normal("normal");
            let mut acc = child_rng(seed, 0, "accept");
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let v = z();
                let u: f64 = acc.random();
                if u * envelope < 1.0 + tilt.eval(v) / root_n {
                    out.push(mu0 + sigma0 * v);
                }
            }
            out
        }
        Distribution::AddLocalAlt { gamma, mu0, sigma0, g_mean, g_var } => {
            let weight = gamma / (n as f64).sqrt();
            let mut z = normal("normal");
            let mut pick = child_rng(seed, 0, "component");
            let g_sd = g_var.sqrt();
            (0..n)
                .map(|_| {
                    let u: f64 = pick.random();
                    let v = z();
                    if u < weight {
                        g_mean + g_sd * v
                    } else {
                        mu0 + sigma0 * v
                    }
                })
                .collect()
        }
        Distribution::ModelFamily { model, theta } => {
            return model.build()?.sample(theta, n, seed);
        }
        Distribution::ConditionalGaussianRing { dim, weights, epsilon, gamma1, gamma2, chain } => {
            let w = weights.resolve(*dim)?;
            let sigma = ring_sigma(*dim, &w, *epsilon);
            return gibbs_conditional_gaussian(&sigma, &vec![*gamma1; *dim], &vec![*gamma2; *dim], &chain.with_seed(seed), n);
        }
    };
    SampleBatch::from_flat(xs, 1)
}
