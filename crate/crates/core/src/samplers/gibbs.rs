use nalgebra::DMatrix;
use rand_distr::{Distribution as _, StandardNormal};

use super::ChainConfig;
use crate::error::Result;
use crate::models::check_interaction_matrix;
use crate::sample::SampleBatch;
use crate::seed::rng_from_seed;

/// Systematic-scan Gibbs sampler for the conditionally Gaussian model
/// `p(x) ∝ exp(Σ_{i≠j} Σ_ij x_i² x_j² + γ2ᵀx² + γ1ᵀx)`.
///
/// Each full conditional is `N(−γ1_i / (2c_i), −1/(2c_i))` with
/// `c_i = Σ_{j≠i} 2Σ_ij x_j² + γ2_i`, which is negative under the model
/// constraints. The chain starts at the origin, discards `burn_in` sweeps and
/// then keeps every `thin`-th sweep.
pub fn gibbs_conditional_gaussian(
    sigma: &DMatrix<f64>,
    gamma1: &[f64],
    gamma2: &[f64],
    cfg: &ChainConfig,
    n: usize,
) -> Result<SampleBatch> {
    check_interaction_matrix(sigma, gamma1, gamma2)?;
    cfg.validate()?;
    let d = sigma.nrows();
    let neighbours: Vec<Vec<(usize, f64)>> = (0..d)
        .map(|i| (0..d).filter(|&j| j != i && sigma[(i, j)] != 0.0).map(|j| (j, 2.0 * sigma[(i, j)])).collect())
        .collect();
    let mut rng = rng_from_seed(cfg.seed);
    let mut x = vec![0.0; d];
    let sweep = |x: &mut [f64], rng: &mut crate::seed::Rng| {
        for i in 0..d {
            let c: f64 = neighbours[i].iter().map(|&(j, s)| s * x[j] * x[j]).sum::<f64>() + gamma2[i];
            let z: f64 = StandardNormal.sample(rng);
            x[i] = -gamma1[i] / (2.0 * c) + (-0.5 / c).sqrt() * z;
        }
    };
    for _ in 0..cfg.burn_in {
        sweep(&mut x, &mut rng);
    }
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for _ in 0..cfg.thin {
            sweep(&mut x, &mut rng);
        }
        data.extend_from_slice(&x);
    }
    Ok(SampleBatch::from_flat_unchecked(data, d))
}
