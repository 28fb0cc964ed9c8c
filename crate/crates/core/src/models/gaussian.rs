use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::{AffineScoreDecomposition, ModelFamily, ParamBox};
use crate::error::{Error, Result};
use crate::sample::SampleBatch;
use crate::seed::rng_from_seed;
use crate::special::{normal_cdf, normal_logpdf};

/// Smallest admissible σ for the Gaussian family.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Score of N(μ, σ²) at x: `−(x−μ)/σ²`.
pub fn gaussian_score(mu: f64, sigma: f64, x: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("σ must be positive, got {sigma}")));
    }
    Ok(-(x - mu) / (sigma * sigma))
}

/// Univariate normal family parameterized by θ = (μ, σ).
#[derive(Debug, Clone, Default)]
pub struct Gaussian;

impl ModelFamily for Gaussian {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn data_dim(&self) -> usize {
        1
    }

    fn param_box(&self) -> ParamBox {
        ParamBox { lower: vec![f64::NEG_INFINITY, SIGMA_FLOOR], upper: vec![f64::INFINITY, f64::INFINITY] }
    }

    fn validate_params(&self, theta: &[f64]) -> Result<()> {
        if !(theta[1] > 0.0) {
            return Err(Error::InvalidParameter(format!("σ must be positive, got {}", theta[1])));
        }
        Ok(())
    }

    fn score_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let (mu, sigma) = (theta[0], theta[1]);
        out[0] = -(x[0] - mu) / (sigma * sigma);
    }

    fn param_score_jacobian(&self, theta: &[f64], x: &[f64]) -> Option<DMatrix<f64>> {
        let (mu, sigma) = (theta[0], theta[1]);
        Some(DMatrix::from_row_slice(1, 2, &[1.0 / (sigma * sigma), 2.0 * (x[0] - mu) / sigma.powi(3)]))
    }

    fn score_divergence_param_grad(&self, theta: &[f64], _x: &[f64]) -> Option<Vec<f64>> {
        // ∇ₓ·s = −1/σ²
        Some(vec![0.0, 2.0 / theta[1].powi(3)])
    }

    fn unnorm_logdensity(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        let z = x[0] - theta[0];
        Some(-z * z / (2.0 * theta[1] * theta[1]))
    }

    fn logpdf(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        Some(normal_logpdf((x[0] - theta[0]) / theta[1]) - theta[1].ln())
    }

    fn cdf(&self, theta: &[f64], x: f64) -> Option<f64> {
        Some(normal_cdf((x - theta[0]) / theta[1]))
    }

    fn initial_guess(&self, samples: &SampleBatch) -> Vec<f64> {
        crate::estimators::mle_gaussian(samples).map_or_else(|_| vec![0.0, 1.0], |(m, s)| vec![m, s])
    }

    fn sample(&self, theta: &[f64], n: usize, seed: u64) -> Result<SampleBatch> {
        self.check_theta(theta)?;
        let mut rng = rng_from_seed(seed);
        let data = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                theta[0] + theta[1] * z
            })
            .collect();
        Ok(SampleBatch::from_flat_unchecked(data, 1))
    }
}

/// N(θ, I_d) with unknown mean: `s_θ(x) = θ − x`.
#[derive(Debug, Clone)]
pub struct GaussianLocation {
    dim: usize,
}

impl GaussianLocation {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(Self { dim })
    }
}

impl ModelFamily for GaussianLocation {
    fn name(&self) -> &str {
        "gaussian_location"
    }

    fn param_dim(&self) -> usize {
        self.dim
    }

    fn data_dim(&self) -> usize {
        self.dim
    }

    fn param_box(&self) -> ParamBox {
        ParamBox::unbounded(self.dim)
    }

    fn validate_params(&self, _theta: &[f64]) -> Result<()> {
        Ok(())
    }

    fn score_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        for ((o, t), v) in out.iter_mut().zip(theta).zip(x) {
            *o = t - v;
        }
    }

    fn param_score_jacobian(&self, _theta: &[f64], _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.dim, self.dim))
    }

    fn score_divergence_param_grad(&self, _theta: &[f64], _x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }

    fn unnorm_logdensity(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        Some(-0.5 * crate::kernels::sq_dist(theta, x))
    }

    fn logpdf(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        Some(theta.iter().zip(x).map(|(t, v)| normal_logpdf(v - t)).sum())
    }

    fn cdf(&self, theta: &[f64], x: f64) -> Option<f64> {
        (self.dim == 1).then(|| normal_cdf(x - theta[0]))
    }

    fn affine_parts(&self, x: &[f64]) -> Option<AffineScoreDecomposition> {
        Some(AffineScoreDecomposition {
            j: DMatrix::identity(self.dim, self.dim),
            b: x.iter().map(|v| -v).collect(),
            divergence_grad: vec![0.0; self.dim],
        })
    }

    fn sample(&self, theta: &[f64], n: usize, seed: u64) -> Result<SampleBatch> {
        self.check_theta(theta)?;
        let mut rng = rng_from_seed(seed);
        let mut data = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            for t in theta {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(t + z);
            }
        }
        Ok(SampleBatch::from_flat_unchecked(data, self.dim))
    }
}
