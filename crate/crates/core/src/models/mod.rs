//! Score-based parametric families.
//!
//! The Stein statistic only touches a model through its score
//! `s_θ(x) = ∇ₓ log p_θ(x)`; unnormalized log-densities are exposed only
//! where a sampler needs them.

mod cond_gauss;
mod gaussian;
mod kef;
mod spec;

use std::fmt::Debug;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleBatch;

pub(crate) use cond_gauss::check_interaction_matrix;
pub use cond_gauss::{cond_gauss_score, ring_edges, ConditionalGaussian, EdgePattern, EdgeSet};
pub use gaussian::{gaussian_score, Gaussian, GaussianLocation, SIGMA_FLOOR};
pub use kef::{kef_basis, kef_basis_d1, kef_score, KernelExpFamily};
pub use spec::{ModelSpec, ScalarOrVec};

/// Coordinatewise box constraints on a parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn unbounded(k: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; k], upper: vec![f64::INFINITY; k] }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::InvalidParameter("box lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (l, u))| t >= l && t <= u)
    }

    /// Coordinatewise clamp.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(self.lower.iter().zip(&self.upper)).map(|(t, (l, u))| t.clamp(*l, *u)).collect()
    }
}

/// `s_θ(x) = J(x)θ + b(x)` for families whose score is affine in θ.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineScoreDecomposition {
    /// d × k
    pub j: DMatrix<f64>,
    pub b: Vec<f64>,
    /// θ-gradient of the divergence ∇ₓ·s_θ(x); constant in θ.
    pub divergence_grad: Vec<f64>,
}

impl AffineScoreDecomposition {
    pub fn reconstruct(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.j.nrows())
            .map(|a| self.b[a] + (0..self.j.ncols()).map(|l| self.j[(a, l)] * theta[l]).sum::<f64>())
            .collect()
    }
}

/// A parametric family `{p_θ : θ ∈ Θ}` on ℝ^d described by its score.
///
/// Implementations are immutable after construction and are shared across
/// bootstrap worker threads.
pub trait ModelFamily: Send + Sync + Debug {
    fn name(&self) -> &str;

    /// k
    fn param_dim(&self) -> usize;

    /// d
    fn data_dim(&self) -> usize;

    fn param_box(&self) -> ParamBox;

    /// Rejects parameters outside the family's domain.
    fn validate_params(&self, theta: &[f64]) -> Result<()>;

    /// Writes `s_θ(x)` into `out`. Callers guarantee dimensions and a
    /// validated θ.
    fn score_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// `∇_θ s_θ(x)`, a d × k matrix.
    fn param_score_jacobian(&self, _theta: &[f64], _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// `∇_θ (∇ₓ · s_θ(x))`, length k.
    fn score_divergence_param_grad(&self, _theta: &[f64], _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// log p_θ(x) up to a θ-dependent constant.
    fn unnorm_logdensity(&self, _theta: &[f64], _x: &[f64]) -> Option<f64> {
        None
    }

    /// Normalized log-density, for families where it is tractable.
    fn logpdf(&self, _theta: &[f64], _x: &[f64]) -> Option<f64> {
        None
    }

    /// Model CDF, for one-dimensional families where it is tractable.
    fn cdf(&self, _theta: &[f64], _x: f64) -> Option<f64> {
        None
    }

    fn affine_parts(&self, _x: &[f64]) -> Option<AffineScoreDecomposition> {
        None
    }

    /// Starting point for numeric estimators when no closed form exists.
    fn initial_guess(&self, _samples: &SampleBatch) -> Vec<f64> {
        vec![0.0; self.param_dim()]
    }

    /// `n` draws from `p_θ`; a pure function of `(θ, n, seed)`.
    fn sample(&self, theta: &[f64], n: usize, seed: u64) -> Result<SampleBatch>;

    fn score(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        if x.len() != self.data_dim() {
            return Err(Error::DimensionMismatch { expected: self.data_dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score input"));
        }
        let mut out = vec![0.0; self.data_dim()];
        self.score_into(theta, x, &mut out);
        Ok(out)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::DimensionMismatch { expected: self.param_dim(), got: theta.len() });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameter"));
        }
        self.validate_params(theta)
    }

    /// Scores of every row, flattened n × d.
    fn score_batch(&self, theta: &[f64], samples: &SampleBatch) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        if samples.dim() != self.data_dim() {
            return Err(Error::DimensionMismatch { expected: self.data_dim(), got: samples.dim() });
        }
        let d = self.data_dim();
        let mut out = vec![0.0; samples.n() * d];
        for (row, o) in samples.rows().zip(out.chunks_exact_mut(d)) {
            self.score_into(theta, row, o);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score"));
        }
        Ok(out)
    }
}

/// The affine decomposition of `family` at `x`, or an error when the family
/// is not affine in θ.
pub fn affine_score_decomposition(family: &dyn ModelFamily, x: &[f64]) -> Result<AffineScoreDecomposition> {
    if x.len() != family.data_dim() {
        return Err(Error::DimensionMismatch { expected: family.data_dim(), got: x.len() });
    }
    family.affine_parts(x).ok_or_else(|| Error::NotAffine(family.name().to_string()))
}

pub fn project_to_domain(family: &dyn ModelFamily, theta: &[f64]) -> Vec<f64> {
    family.param_box().project(theta)
}

#[cfg(test)]
pub(crate) mod testing {
    //! Finite-difference oracles shared by the family tests.
    use super::*;

    pub fn fd_logdensity_grad(f: &dyn ModelFamily, theta: &[f64], x: &[f64], step: f64) -> Vec<f64> {
        (0..x.len())
            .map(|a| {
                let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                xp[a] += step;
                xm[a] -= step;
                (f.unnorm_logdensity(theta, &xp).unwrap() - f.unnorm_logdensity(theta, &xm).unwrap()) / (2.0 * step)
            })
            .collect()
    }

    pub fn fd_param_jacobian(f: &dyn ModelFamily, theta: &[f64], x: &[f64], step: f64) -> DMatrix<f64> {
        let d = f.data_dim();
        let k = f.param_dim();
        let mut jac = DMatrix::zeros(d, k);
        for l in 0..k {
            let (mut tp, mut tm) = (theta.to_vec(), theta.to_vec());
            tp[l] += step;
            tm[l] -= step;
            let sp = f.score(&tp, x).unwrap();
            let sm = f.score(&tm, x).unwrap();
            for a in 0..d {
                jac[(a, l)] = (sp[a] - sm[a]) / (2.0 * step);
            }
        }
        jac
    }

    /// θ-gradient of the score divergence via nested central differences.
    pub fn fd_divergence_grad(f: &dyn ModelFamily, theta: &[f64], x: &[f64], step: f64) -> Vec<f64> {
        let div = |t: &[f64]| -> f64 {
            (0..x.len())
                .map(|a| {
                    let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                    xp[a] += step;
                    xm[a] -= step;
                    (f.score(t, &xp).unwrap()[a] - f.score(t, &xm).unwrap()[a]) / (2.0 * step)
                })
                .sum()
        };
        (0..theta.len())
            .map(|l| {
                let (mut tp, mut tm) = (theta.to_vec(), theta.to_vec());
                tp[l] += step;
                tm[l] -= step;
                (div(&tp) - div(&tm)) / (2.0 * step)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_clamps_and_is_idempotent() {
        let b = ParamBox::new(vec![f64::NEG_INFINITY, 0.0], vec![-1e-6, 1.0]).unwrap();
        assert_eq!(b.project(&[0.2, 0.5]), vec![-1e-6, 0.5]);
        let inside = [-3.0, 0.25];
        assert_eq!(b.project(&inside), inside.to_vec());
        let p = b.project(&[5.0, -2.0]);
        assert_eq!(b.project(&p), p);
        assert!(ParamBox::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn non_affine_family_is_rejected() {
        let g = Gaussian::default();
        assert!(matches!(affine_score_decomposition(&g, &[0.0]), Err(Error::NotAffine(_))));
    }
}
