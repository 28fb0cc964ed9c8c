//! Finite-rank kernel exponential family on ℝ:
//! `p_θ(x) ∝ q(x)·exp(Σ_ℓ θ_ℓ φ_ℓ(x))` with a centred normal reference `q`
//! and the Gaussian-kernel feature basis `φ_ℓ(x) = x^ℓ/√(ℓ!)·exp(−x²/(2σ²))`.

use nalgebra::DMatrix;

use super::{AffineScoreDecomposition, ModelFamily, ParamBox};
use crate::error::{Error, Result};
use crate::sample::SampleBatch;
use crate::samplers::{mala_sample, ChainConfig};

fn sqrt_factorial(l: usize) -> f64 {
    (1..=l).map(|i| i as f64).product::<f64>().sqrt()
}

/// φ_ℓ(x)
pub fn kef_basis(l: usize, x: f64, bandwidth: f64) -> f64 {
    x.powi(l as i32) / sqrt_factorial(l) * (-x * x / (2.0 * bandwidth * bandwidth)).exp()
}

/// φ_ℓ'(x) = (ℓx^{ℓ−1} − x^{ℓ+1}/σ²)/√(ℓ!)·exp(−x²/(2σ²))
pub fn kef_basis_d1(l: usize, x: f64, bandwidth: f64) -> f64 {
    let s2 = bandwidth * bandwidth;
    let g = (-x * x / (2.0 * s2)).exp();
    let lead = if l == 0 { 0.0 } else { l as f64 * x.powi(l as i32 - 1) };
    (lead - x.powi(l as i32 + 1) / s2) / sqrt_factorial(l) * g
}

/// φ_ℓ''(x)
fn kef_basis_d2(l: usize, x: f64, bandwidth: f64) -> f64 {
    let s2 = bandwidth * bandwidth;
    let g = (-x * x / (2.0 * s2)).exp();
    let lf = l as f64;
    let lead = if l >= 2 { lf * (lf - 1.0) * x.powi(l as i32 - 2) } else { 0.0 };
    (lead - (2.0 * lf + 1.0) * x.powi(l as i32) / s2 + x.powi(l as i32 + 2) / (s2 * s2)) / sqrt_factorial(l) * g
}

/// Score of the rank-p family: `−x/ref_var + Σ_ℓ θ_ℓ φ_ℓ'(x)`.
pub fn kef_score(theta: &[f64], x: f64, kernel_bandwidth: f64, ref_var: f64) -> Result<f64> {
    if theta.is_empty() {
        return Err(Error::InvalidParameter("rank must be at least 1".into()));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("kernel exponential family parameter"));
    }
    if !(kernel_bandwidth > 0.0 && ref_var > 0.0) {
        return Err(Error::InvalidParameter("bandwidth and reference variance must be positive".into()));
    }
    Ok(-x / ref_var
        + theta.iter().enumerate().map(|(i, t)| t * kef_basis_d1(i + 1, x, kernel_bandwidth)).sum::<f64>())
}

#[derive(Debug, Clone)]
pub struct KernelExpFamily {
    rank: usize,
    kernel_bandwidth: f64,
    ref_var: f64,
    chain: ChainConfig,
}

impl KernelExpFamily {
    pub fn new(rank: usize, kernel_bandwidth: f64, ref_var: f64, chain: ChainConfig) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter("rank must be at least 1".into()));
        }
        if !(kernel_bandwidth > 0.0 && ref_var > 0.0) {
            return Err(Error::InvalidParameter("bandwidth and reference variance must be positive".into()));
        }
        chain.validate()?;
        Ok(Self { rank, kernel_bandwidth, ref_var, chain })
    }

    /// Rank-p family with unit kernel bandwidth and an N(0, 9) reference.
    pub fn standard(rank: usize) -> Result<Self> {
        Self::new(rank, 1.0, 9.0, ChainConfig::default())
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

impl ModelFamily for KernelExpFamily {
    fn name(&self) -> &str {
        "kef"
    }

    fn param_dim(&self) -> usize {
        self.rank
    }

    fn data_dim(&self) -> usize {
        1
    }

    fn param_box(&self) -> ParamBox {
        ParamBox::unbounded(self.rank)
    }

    fn validate_params(&self, _theta: &[f64]) -> Result<()> {
        Ok(())
    }

    fn score_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let x = x[0];
        out[0] = -x / self.ref_var
            + theta.iter().enumerate().map(|(i, t)| t * kef_basis_d1(i + 1, x, self.kernel_bandwidth)).sum::<f64>();
    }

    fn param_score_jacobian(&self, _theta: &[f64], x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_fn(1, self.rank, |_, l| kef_basis_d1(l + 1, x[0], self.kernel_bandwidth)))
    }

    fn score_divergence_param_grad(&self, _theta: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        Some((1..=self.rank).map(|l| kef_basis_d2(l, x[0], self.kernel_bandwidth)).collect())
    }

    fn unnorm_logdensity(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        let x = x[0];
        Some(
            -x * x / (2.0 * self.ref_var)
                + theta.iter().enumerate().map(|(i, t)| t * kef_basis(i + 1, x, self.kernel_bandwidth)).sum::<f64>(),
        )
    }

    fn affine_parts(&self, x: &[f64]) -> Option<AffineScoreDecomposition> {
        Some(AffineScoreDecomposition {
            j: self.param_score_jacobian(&[], x)?,
            b: vec![-x[0] / self.ref_var],
            divergence_grad: self.score_divergence_param_grad(&[], x)?,
        })
    }

    fn sample(&self, theta: &[f64], n: usize, seed: u64) -> Result<SampleBatch> {
        self.check_theta(theta)?;
        mala_sample(self, theta, &self.chain.with_seed(seed), n)
    }
}
