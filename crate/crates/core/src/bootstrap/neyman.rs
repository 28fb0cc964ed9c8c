//! The Neyman-orthogonalized SKSD test with a wild bootstrap.
//!
//! With `r(x) = ∇_θ s_θ(x)` (d × k), `G = E[rᵀr]`, `P = G⁺` and Monte-Carlo
//! draws `X_1..X_m ~ p_θ̂`, the orthogonalized matrix kernel is
//!
//! ```text
//! K̃(x, y) = k(x, y) I − r(x) P A(y) − A(x)ᵀ P r(y)ᵀ + r(x) P C P r(y)ᵀ
//! A(y)    = (1/m) Σ_l r(X_l)ᵀ k(X_l, y)                      (k × d)
//! C       = (1/m²) Σ_{l,l'} r(X_l)ᵀ k(X_l, X_l') r(X_l')      (k × k)
//! ```
//!
//! Its Stein kernel follows by applying the Stein operator to each side:
//! `h̃ = h − ρ(x)ᵀPα(y) − α(x)ᵀPρ(y) + ρ(x)ᵀPCPρ(y)` with
//! `ρ(x) = r(x)ᵀs(x) + ∇_θ(∇ₓ·s_θ)(x)` and
//! `α(y) = (1/m) Σ_l r(X_l)ᵀ (k(X_l, y) s(y) + ∇_y k(X_l, y))`.
//! All derivatives are analytic.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;

use super::{BootstrapOptions, TestReport};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, EstimatorSpec};
use crate::kernels::{KernelChoice, KernelSpec};
use crate::models::ModelFamily;
use crate::sample::SampleBatch;
use crate::seed::{child_rng, child_seed};
use crate::stein::stein_gram;

/// Smallest Monte-Carlo budget accepted.
pub const MIN_MC_DRAWS: usize = 100;

/// Cached Monte-Carlo moments of the orthogonalized kernel at a fixed θ̂.
#[derive(Debug, Clone)]
pub struct NeymanKernel {
    base: KernelSpec,
    theta: Vec<f64>,
    draws: SampleBatch,
    /// r(X_l), each d × k
    jacobians: Vec<DMatrix<f64>>,
    /// E[rᵀr]
    g: DMatrix<f64>,
    /// G⁺
    p: DMatrix<f64>,
    /// P C P
    pcp: DMatrix<f64>,
}

fn jacobian(family: &dyn ModelFamily, theta: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
    family
        .param_score_jacobian(theta, x)
        .ok_or_else(|| Error::Unsupported { model: family.name().into(), what: "a parameter Jacobian of the score" })
}

/// Builds the orthogonalized kernel from `m` draws of `p_θ`.
pub fn neyman_orthogonal_kernel(
    family: &dyn ModelFamily,
    theta: &[f64],
    base: &KernelSpec,
    m: usize,
    seed: u64,
) -> Result<NeymanKernel> {
    base.validate()?;
    family.check_theta(theta)?;
    if m < MIN_MC_DRAWS {
        return Err(Error::InvalidParameter(format!("Monte-Carlo budget must be at least {MIN_MC_DRAWS}, got {m}")));
    }
    let k = family.param_dim();
    let draws = family.sample(theta, m, seed)?;
    let jacobians: Vec<DMatrix<f64>> = draws.rows().map(|x| jacobian(family, theta, x)).collect::<Result<_>>()?;
    let mf = m as f64;
    let mut g = DMatrix::zeros(k, k);
    for r in &jacobians {
        g += r.transpose() * r;
    }
    g /= mf;
    let g = (&g + g.transpose()) * 0.5;
    let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let p = if scale == 0.0 {
        DMatrix::zeros(k, k)
    } else {
        g.clone().pseudo_inverse(1e-12 * scale).map_err(|e| Error::Estimation(e.to_string()))?
    };

    // C = (1/m²) Σ_l r_lᵀ (Σ_l' k(X_l, X_l') r_l'), one row block per l.
    let blocks: Vec<DMatrix<f64>> = (0..m)
        .into_par_iter()
        .map(|l| {
            let xl = draws.row(l);
            let mut acc = DMatrix::zeros(jacobians[l].nrows(), k);
            for (lp, rp) in jacobians.iter().enumerate() {
                acc += rp * base.value_unchecked(xl, draws.row(lp));
            }
            jacobians[l].transpose() * acc
        })
        .collect();
    let mut c = DMatrix::zeros(k, k);
    for b in blocks {
        c += b;
    }
    c /= mf * mf;
    let pcp = &p * c * &p;
    Ok(NeymanKernel { base: *base, theta: theta.to_vec(), draws, jacobians, g, p, pcp })
}

impl NeymanKernel {
    pub fn mc_draws(&self) -> usize {
        self.draws.n()
    }

    pub fn base(&self) -> &KernelSpec {
        &self.base
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Monte-Carlo estimate of `E[rᵀr]`.
    pub fn moment(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `A(y)`, k × d.
    fn a(&self, y: &[f64]) -> DMatrix<f64> {
        let (d, k) = (y.len(), self.g.nrows());
        let mut out = DMatrix::zeros(k, d);
        for (l, r) in self.jacobians.iter().enumerate() {
            out += r.transpose() * self.base.value_unchecked(self.draws.row(l), y);
        }
        out / self.mc_draws() as f64
    }

    /// `α(y)` for a point with score `s`.
    fn alpha(&self, y: &[f64], s: &[f64]) -> DVector<f64> {
        let d = y.len();
        let mut grad = vec![0.0; d];
        let mut v = DVector::zeros(d);
        let mut out = DVector::zeros(self.g.nrows());
        for (l, r) in self.jacobians.iter().enumerate() {
            let kv = self.base.grad_y_into(self.draws.row(l), y, &mut grad);
            for a in 0..d {
                v[a] = kv * s[a] + grad[a];
            }
            out += r.transpose() * &v;
        }
        out / self.mc_draws() as f64
    }

    /// The d × d orthogonalized kernel `K̃(x, y)`.
    pub fn matrix(&self, family: &dyn ModelFamily, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
        crate::kernels::check_pair(x, y)?;
        let (rx, ry) = (jacobian(family, &self.theta, x)?, jacobian(family, &self.theta, y)?);
        let d = x.len();
        let kxy = self.base.value_unchecked(x, y);
        let (ax, ay) = (self.a(x), self.a(y));
        Ok(DMatrix::identity(d, d) * kxy - &rx * &self.p * ay - ax.transpose() * &self.p * ry.transpose()
            + &rx * &self.pcp * ry.transpose())
    }

    /// The n × n matrix of orthogonalized Stein-kernel values on `samples`.
    pub fn stein_matrix(&self, family: &dyn ModelFamily, samples: &SampleBatch) -> Result<DMatrix<f64>> {
        let n = samples.n();
        let k = self.g.nrows();
        let scores = family.score_batch(&self.theta, samples)?;
        let d = samples.dim();
        let rows: Vec<(DVector<f64>, DVector<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = samples.row(i);
                let s = &scores[i * d..(i + 1) * d];
                let r = jacobian(family, &self.theta, x)?;
                let div = family
                    .score_divergence_param_grad(&self.theta, x)
                    .ok_or_else(|| Error::Unsupported { model: family.name().into(), what: "the parameter gradient of the score divergence" })?;
                let rho = r.transpose() * DVector::from_column_slice(s) + DVector::from_vec(div);
                Ok((rho, self.alpha(x, s)))
            })
            .collect::<Result<_>>()?;
        let rho = DMatrix::from_fn(n, k, |i, j| rows[i].0[j]);
        let alpha = DMatrix::from_fn(n, k, |i, j| rows[i].1[j]);
        let h = stein_gram(&self.base, samples, &scores);
        let cross = &rho * &self.p * alpha.transpose();
        let h = h - &cross - cross.transpose() + &rho * &self.pcp * rho.transpose();
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("orthogonalized stein matrix"));
        }
        Ok(h)
    }
}

/// `wᵀHw / n²`.
pub fn wild_statistic(h: &DMatrix<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let wv = DVector::from_column_slice(w);
    wv.dot(&(h * &wv)) / (n * n) as f64
}

/// Wild-bootstrap statistics with Rademacher weights, one child stream per
/// replicate.
pub fn wild_bootstrap_stats(h: &DMatrix<f64>, b: usize, seed: u64) -> Vec<f64> {
    let n = h.nrows();
    (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = child_rng(seed, rep as u64, "wild");
            let w: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            wild_statistic(h, &w)
        })
        .collect()
}

/// Neyman-orthogonalized SKSD test calibrated by the wild bootstrap.
///
/// The median-heuristic bandwidth is resolved on `samples` and also frozen
/// into the estimator. `mc_draws` defaults to `max(10·n, 100)`.
pub fn neyman_sksd_test(
    family: &dyn ModelFamily,
    estimator: &EstimatorSpec,
    kernel: &KernelChoice,
    samples: &SampleBatch,
    mc_draws: Option<usize>,
    opts: &BootstrapOptions,
) -> Result<TestReport> {
    let spec = kernel.resolve(samples)?;
    neyman_sksd_test_with(family, &estimator.freeze(samples)?, &spec, samples, mc_draws, opts)
}

/// [`neyman_sksd_test`] with an arbitrary estimator and a resolved kernel.
pub fn neyman_sksd_test_with(
    family: &dyn ModelFamily,
    estimator: &dyn Estimator,
    spec: &KernelSpec,
    samples: &SampleBatch,
    mc_draws: Option<usize>,
    opts: &BootstrapOptions,
) -> Result<TestReport> {
    opts.validate()?;
    let start = Instant::now();
    let n = samples.n();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let theta_hat = estimator.estimate(family, samples)?;
    let m = mc_draws.unwrap_or((10 * n).max(MIN_MC_DRAWS));
    let handle = neyman_orthogonal_kernel(family, &theta_hat, spec, m, child_seed(opts.seed, 0, "neyman-mc"))?;
    let h = handle.stein_matrix(family, samples)?;
    let statistic = h.sum() / (n * n) as f64;
    let stats = wild_bootstrap_stats(&h, opts.b, opts.seed);
    let p_value = opts.convention.p_value(statistic, &stats);
    Ok(TestReport {
        method: "neyman-sksd".into(),
        statistic,
        theta_hat,
        bootstrap_stats: stats,
        p_value,
        reject: p_value <= opts.alpha,
        alpha: opts.alpha,
        b: opts.b,
        n,
        seed: opts.seed,
        failures: 0,
        failure_flag: false,
        bandwidth: match *spec {
            KernelSpec::Gaussian { bandwidth } => Some(bandwidth),
            KernelSpec::Linear => None,
        },
        convention: opts.convention,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
