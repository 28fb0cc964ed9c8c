//! Quadratic-interaction model with Gaussian full conditionals:
//! `p(x) ∝ exp(Σ_{i≠j} Σ_ij x_i² x_j² + Σ_k γ2_k x_k² + Σ_l γ1_l x_l)`.
//!
//! The free parameters are the interaction weights on a chosen edge set,
//! one per unordered pair; the γ vectors are fixed and known.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{AffineScoreDecomposition, ModelFamily, ParamBox};
use crate::error::{Error, Result};
use crate::sample::SampleBatch;
use crate::samplers::{gibbs_conditional_gaussian, ChainConfig};

/// Which interaction weights are free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeSet {
    Named(EdgePattern),
    Explicit(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePattern {
    /// Nearest neighbours on a cycle.
    Ring,
    /// Every unordered pair (strict upper triangle, row-major).
    All,
}

impl EdgeSet {
    pub fn resolve(&self, d: usize) -> Result<Vec<(usize, usize)>> {
        let mut edges: Vec<(usize, usize)> = match self {
            EdgeSet::Named(EdgePattern::Ring) => ring_edges(d),
            EdgeSet::Named(EdgePattern::All) => (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).collect(),
            EdgeSet::Explicit(list) => {
                let mut out = Vec::with_capacity(list.len());
                for &[a, b] in list {
                    if a == b || a >= d || b >= d {
                        return Err(Error::InvalidParameter(format!("invalid edge ({a}, {b}) for dimension {d}")));
                    }
                    out.push((a.min(b), a.max(b)));
                }
                out
            }
        };
        let before = edges.len();
        edges.sort_unstable();
        edges.dedup();
        if edges.len() != before {
            return Err(Error::InvalidParameter("duplicate edge".into()));
        }
        Ok(edges)
    }
}

/// Cycle edges `(i, i+1 mod d)` as ordered pairs, sorted.
pub fn ring_edges(d: usize) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = (0..d)
        .filter(|_| d >= 2)
        .map(|i| {
            let j = (i + 1) % d;
            (i.min(j), i.max(j))
        })
        .collect();
    e.sort_unstable();
    e.dedup();
    e
}

fn check_gammas(d: usize, gamma1: &[f64], gamma2: &[f64]) -> Result<()> {
    if gamma1.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: gamma1.len() });
    }
    if gamma2.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: gamma2.len() });
    }
    if gamma1.iter().chain(gamma2).any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("γ"));
    }
    if let Some(g) = gamma2.iter().find(|g| **g >= 0.0) {
        return Err(Error::InvalidParameter(format!("γ2 entries must be negative, got {g}")));
    }
    Ok(())
}

/// Checks symmetry, zero diagonal, and non-positive off-diagonal entries.
pub(crate) fn check_interaction_matrix(sigma: &DMatrix<f64>, gamma1: &[f64], gamma2: &[f64]) -> Result<()> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: sigma.ncols() });
    }
    check_gammas(d, gamma1, gamma2)?;
    for i in 0..d {
        if sigma[(i, i)] != 0.0 {
            return Err(Error::InvalidParameter(format!("Σ diagonal must be zero, Σ[{i},{i}] = {}", sigma[(i, i)])));
        }
        for j in 0..d {
            let v = sigma[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite("Σ"));
            }
            if v != sigma[(j, i)] {
                return Err(Error::InvalidParameter("Σ must be symmetric".into()));
            }
            if v > 0.0 {
                return Err(Error::InvalidParameter(format!("Σ[{i},{j}] = {v} is positive")));
            }
        }
    }
    Ok(())
}

/// Score of the model at x: `s_i = Σ_{j≠i} 4Σ_ij x_i x_j² + 2γ2_i x_i + γ1_i`.
pub fn cond_gauss_score(sigma: &DMatrix<f64>, gamma1: &[f64], gamma2: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_interaction_matrix(sigma, gamma1, gamma2)?;
    let d = sigma.nrows();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok((0..d)
        .map(|i| {
            let inter: f64 = (0..d).filter(|&j| j != i).map(|j| 4.0 * sigma[(i, j)] * x[i] * x[j] * x[j]).sum();
            inter + 2.0 * gamma2[i] * x[i] + gamma1[i]
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    dim: usize,
    edges: Vec<(usize, usize)>,
    /// neighbours[i] = (j, edge index)
    neighbours: Vec<Vec<(usize, usize)>>,
    gamma1: Vec<f64>,
    gamma2: Vec<f64>,
    chain: ChainConfig,
}

impl ConditionalGaussian {
    pub fn new(dim: usize, edges: &EdgeSet, gamma1: Vec<f64>, gamma2: Vec<f64>, chain: ChainConfig) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        check_gammas(dim, &gamma1, &gamma2)?;
        chain.validate()?;
        let edges = edges.resolve(dim)?;
        let mut neighbours = vec![Vec::new(); dim];
        for (e, &(p, q)) in edges.iter().enumerate() {
            neighbours[p].push((q, e));
            neighbours[q].push((p, e));
        }
        Ok(Self { dim, edges, neighbours, gamma1, gamma2, chain })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn gamma1(&self) -> &[f64] {
        &self.gamma1
    }

    pub fn gamma2(&self) -> &[f64] {
        &self.gamma2
    }

    /// Full symmetric interaction matrix for edge weights θ.
    pub fn sigma_matrix(&self, theta: &[f64]) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.dim, self.dim);
        for (&(p, q), &t) in self.edges.iter().zip(theta) {
            s[(p, q)] = t;
            s[(q, p)] = t;
        }
        s
    }
}

impl ModelFamily for ConditionalGaussian {
    fn name(&self) -> &str {
        "conditional_gaussian"
    }

    fn param_dim(&self) -> usize {
        self.edges.len()
    }

    fn data_dim(&self) -> usize {
        self.dim
    }

    fn param_box(&self) -> ParamBox {
        ParamBox { lower: vec![f64::NEG_INFINITY; self.edges.len()], upper: vec![0.0; self.edges.len()] }
    }

    fn validate_params(&self, theta: &[f64]) -> Result<()> {
        if let Some((e, t)) = theta.iter().enumerate().find(|(_, t)| **t > 0.0) {
            let (p, q) = self.edges[e];
            return Err(Error::InvalidParameter(format!("interaction Σ[{p},{q}] = {t} is positive")));
        }
        Ok(())
    }

    fn score_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let inter: f64 = self.neighbours[i].iter().map(|&(j, e)| theta[e] * x[j] * x[j]).sum();
            out[i] = 4.0 * x[i] * inter + 2.0 * self.gamma2[i] * x[i] + self.gamma1[i];
        }
    }

    fn param_score_jacobian(&self, _theta: &[f64], x: &[f64]) -> Option<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.dim, self.edges.len());
        for (e, &(p, q)) in self.edges.iter().enumerate() {
            j[(p, e)] = 4.0 * x[p] * x[q] * x[q];
            j[(q, e)] = 4.0 * x[q] * x[p] * x[p];
        }
        Some(j)
    }

    fn score_divergence_param_grad(&self, _theta: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        Some(self.edges.iter().map(|&(p, q)| 4.0 * (x[p] * x[p] + x[q] * x[q])).collect())
    }

    fn unnorm_logdensity(&self, theta: &[f64], x: &[f64]) -> Option<f64> {
        // Ordered pairs (i, j) and (j, i) both contribute.
        let inter: f64 = self.edges.iter().zip(theta).map(|(&(p, q), t)| 2.0 * t * x[p] * x[p] * x[q] * x[q]).sum();
        let quad: f64 = self.gamma2.iter().zip(x).map(|(g, v)| g * v * v).sum();
        let lin: f64 = self.gamma1.iter().zip(x).map(|(g, v)| g * v).sum();
        Some(inter + quad + lin)
    }

    fn affine_parts(&self, x: &[f64]) -> Option<AffineScoreDecomposition> {
        Some(AffineScoreDecomposition {
            j: self.param_score_jacobian(&[], x)?,
            b: (0..self.dim).map(|i| 2.0 * self.gamma2[i] * x[i] + self.gamma1[i]).collect(),
            divergence_grad: self.score_divergence_param_grad(&[], x)?,
        })
    }

    fn sample(&self, theta: &[f64], n: usize, seed: u64) -> Result<SampleBatch> {
        self.check_theta(theta)?;
        gibbs_conditional_gaussian(&self.sigma_matrix(theta), &self.gamma1, &self.gamma2, &self.chain.with_seed(seed), n)
    }
}
