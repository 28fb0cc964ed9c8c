//! Random generation: MALA and Gibbs chains for models without exact
//! samplers, and the data-generating processes used in the experiments.

mod dgp;
mod gibbs;
mod mala;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dgp::{dgp_sample, ring_sigma, DgpSpec, Distribution, GenChi2Sampler, RingWeights, Tilt, TiltShape};
pub use gibbs::gibbs_conditional_gaussian;
pub use mala::{mala_chain, mala_sample, ChainRun};

/// Settings for an MCMC chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// Iterations (MALA) or sweeps (Gibbs) discarded before collection.
    pub burn_in: usize,
    /// Keep one state every `thin` iterations.
    pub thin: usize,
    /// MALA step ε; the starting value when `adapt_steps > 0`.
    pub step_size: f64,
    /// Pilot iterations tuning ε towards 0.574 acceptance before it is frozen.
    pub adapt_steps: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { burn_in: 10_000, thin: 20, step_size: 1.0, adapt_steps: 200, seed: 0 }
    }
}

impl ChainConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {}", self.step_size)));
        }
        Ok(())
    }
}
