//! The Stein kernel `h_p(x, y)` and the V/U statistics built from it.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{check_pair, dot, sq_dist, KernelSpec};
use crate::models::ModelFamily;
use crate::sample::SampleBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatForm {
    V,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinStatistic {
    pub value: f64,
    pub form: StatForm,
    pub n: usize,
    pub kernel: KernelSpec,
}

/// `h` from points and their scores:
/// `s(x)ᵀs(y)K + s(x)ᵀ∇_yK + s(y)ᵀ∇ₓK + Tr(∇ₓ∇_yK)`.
#[inline]
pub fn stein_pair(spec: &KernelSpec, x: &[f64], sx: &[f64], y: &[f64], sy: &[f64]) -> f64 {
    match *spec {
        KernelSpec::Gaussian { bandwidth } => {
            let h2 = bandwidth * bandwidth;
            let mut r2 = 0.0;
            let mut ss = 0.0;
            let mut diff_s = 0.0;
            for a in 0..x.len() {
                let r = x[a] - y[a];
                r2 += r * r;
                ss += sx[a] * sy[a];
                diff_s += (sx[a] - sy[a]) * r;
            }
            let k = (-r2 / (2.0 * h2)).exp();
            k * (ss + diff_s / h2 + x.len() as f64 / h2 - r2 / (h2 * h2))
        }
        KernelSpec::Linear => dot(sx, sy) * dot(x, y) + dot(sx, x) + dot(sy, y) + x.len() as f64,
    }
}

pub fn stein_kernel_h(family: &dyn ModelFamily, theta: &[f64], spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_pair(x, y)?;
    let sx = family.score(theta, x)?;
    let sy = family.score(theta, y)?;
    let h = stein_pair(spec, x, &sx, y, &sy);
    if !h.is_finite() {
        return Err(Error::NonFinite("stein kernel"));
    }
    Ok(h)
}

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Full pair sum and diagonal sum of `h` over a scored sample.
///
/// Rows are visited in lexicographic order of the points, reduced
/// independently (upper triangle, off-diagonal doubled) and then combined in
/// that order. The result is therefore bitwise invariant to row permutations
/// and to how rayon splits the work.
pub fn stein_sums(spec: &KernelSpec, samples: &SampleBatch, scores: &[f64]) -> (f64, f64) {
    let n = samples.n();
    let d = samples.dim();
    let order = canonical_order(samples);
    let row = |a: usize| {
        let i = order[a];
        let (xi, si) = (samples.row(i), &scores[i * d..(i + 1) * d]);
        let diag = stein_pair(spec, xi, si, xi, si);
        let mut acc = Kahan::default();
        for &j in &order[a + 1..] {
            acc.add(stein_pair(spec, xi, si, samples.row(j), &scores[j * d..(j + 1) * d]));
        }
        (diag, 2.0 * acc.sum)
    };
    let rows: Vec<(f64, f64)> = if n >= 64 { (0..n).into_par_iter().map(row).collect() } else { (0..n).map(row).collect() };
    let mut total = Kahan::default();
    let mut diag = Kahan::default();
    for (dg, off) in rows {
        total.add(dg);
        total.add(off);
        diag.add(dg);
    }
    (total.sum, diag.sum)
}

fn canonical_order(samples: &SampleBatch) -> Vec<usize> {
    let mut order: Vec<usize> = (0..samples.n()).collect();
    order.sort_by(|&a, &b| {
        samples.row(a).iter().zip(samples.row(b)).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// The n × n matrix `H_ij = h(x_i, x_j)`.
pub fn stein_gram(spec: &KernelSpec, samples: &SampleBatch, scores: &[f64]) -> DMatrix<f64> {
    let n = samples.n();
    let d = samples.dim();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let (xi, si) = (samples.row(i), &scores[i * d..(i + 1) * d]);
        for j in i..n {
            let v = stein_pair(spec, xi, si, samples.row(j), &scores[j * d..(j + 1) * d]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

fn prepare(family: &dyn ModelFamily, theta: &[f64], spec: &KernelSpec, samples: &SampleBatch, min_n: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if samples.n() < min_n {
        return Err(Error::TooFewSamples { needed: min_n, got: samples.n() });
    }
    family.score_batch(theta, samples)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("statistic"))
    }
}

/// `(1/n²) Σ_ij h(x_i, x_j)`.
pub fn v_statistic(family: &dyn ModelFamily, theta: &[f64], spec: &KernelSpec, samples: &SampleBatch) -> Result<SteinStatistic> {
    let scores = prepare(family, theta, spec, samples, 1)?;
    let n = samples.n();
    let (total, _) = stein_sums(spec, samples, &scores);
    Ok(SteinStatistic { value: finite(total / (n * n) as f64)?, form: StatForm::V, n, kernel: *spec })
}

/// `(1/(n(n−1))) Σ_{i≠j} h(x_i, x_j)`; unbiased and possibly negative.
pub fn u_statistic(family: &dyn ModelFamily, theta: &[f64], spec: &KernelSpec, samples: &SampleBatch) -> Result<SteinStatistic> {
    let scores = prepare(family, theta, spec, samples, 2)?;
    let n = samples.n();
    let (total, diag) = stein_sums(spec, samples, &scores);
    Ok(SteinStatistic { value: finite((total - diag) / (n * (n - 1)) as f64)?, form: StatForm::U, n, kernel: *spec })
}

/// V-statistic for the linear kernel in O(n·d²): `‖M + I‖_F²` with
/// `M = (1/n) Σ x_i s(x_i)ᵀ`. This equals `Tr((M + I)²)` when `M` is
/// symmetric, which always holds for d = 1.
pub fn v_statistic_linear_fast(family: &dyn ModelFamily, theta: &[f64], samples: &SampleBatch) -> Result<SteinStatistic> {
    let scores = prepare(family, theta, &KernelSpec::Linear, samples, 1)?;
    Ok(linear_fast_from_scores(samples, &scores))
}

pub(crate) fn linear_fast_from_scores(samples: &SampleBatch, scores: &[f64]) -> SteinStatistic {
    let n = samples.n();
    let d = samples.dim();
    let mut m = DMatrix::<f64>::identity(d, d) * n as f64;
    for (i, x) in samples.rows().enumerate() {
        let s = &scores[i * d..(i + 1) * d];
        for a in 0..d {
            for b in 0..d {
                m[(a, b)] += x[a] * s[b];
            }
        }
    }
    m /= n as f64;
    let value = m.norm_squared();
    SteinStatistic { value, form: StatForm::V, n, kernel: KernelSpec::Linear }
}

/// Gaussian kernel matrix of a sample.
pub(crate) fn gaussian_gram(bandwidth: f64, samples: &SampleBatch) -> DMatrix<f64> {
    let n = samples.n();
    let h2 = bandwidth * bandwidth;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = (-sq_dist(samples.row(i), samples.row(j)) / (2.0 * h2)).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
