use serde::{Deserialize, Serialize};

use super::cond_gauss::EdgePattern;
use super::{ConditionalGaussian, EdgeSet, Gaussian, GaussianLocation, KernelExpFamily, ModelFamily};
use crate::error::{Error, Result};
use crate::samplers::ChainConfig;

/// A scalar broadcast to every coordinate, or an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    pub fn expand(&self, d: usize) -> Result<Vec<f64>> {
        match self {
            ScalarOrVec::Scalar(v) => Ok(vec![*v; d]),
            ScalarOrVec::Vec(v) if v.len() == d => Ok(v.clone()),
            ScalarOrVec::Vec(v) => Err(Error::DimensionMismatch { expected: d, got: v.len() }),
        }
    }
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn nine() -> f64 {
    9.0
}
fn ring() -> EdgeSet {
    EdgeSet::Named(EdgePattern::Ring)
}

/// Serializable description of a model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Gaussian,
    GaussianLocation {
        #[serde(default = "one")]
        dim: usize,
    },
    Kef {
        rank: usize,
        #[serde(default = "unit")]
        kernel_bandwidth: f64,
        #[serde(default = "nine")]
        ref_var: f64,
        #[serde(default)]
        chain: ChainConfig,
    },
    ConditionalGaussian {
        dim: usize,
        #[serde(default = "ring")]
        edges: EdgeSet,
        gamma1: ScalarOrVec,
        gamma2: ScalarOrVec,
        #[serde(default)]
        chain: ChainConfig,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn ModelFamily>> {
        Ok(match self {
            ModelSpec::Gaussian => Box::new(Gaussian),
            ModelSpec::GaussianLocation { dim } => Box::new(GaussianLocation::new(*dim)?),
            ModelSpec::Kef { rank, kernel_bandwidth, ref_var, chain } => {
                Box::new(KernelExpFamily::new(*rank, *kernel_bandwidth, *ref_var, chain.clone())?)
            }
            ModelSpec::ConditionalGaussian { dim, edges, gamma1, gamma2, chain } => Box::new(ConditionalGaussian::new(
                *dim,
                edges,
                gamma1.expand(*dim)?,
                gamma2.expand(*dim)?,
                chain.clone(),
            )?),
        })
    }

    /// Parses the short names accepted on the command line.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(ModelSpec::Gaussian),
            "gaussian_location" | "gaussian-location" => Ok(ModelSpec::GaussianLocation { dim: 1 }),
            other => {
                if let Some(rank) = other.strip_prefix("kef") {
                    let rank = rank.trim_start_matches(['-', '_', ':']).parse().unwrap_or(1);
                    return Ok(ModelSpec::Kef {
                        rank,
                        kernel_bandwidth: 1.0,
                        ref_var: 9.0,
                        chain: ChainConfig::default(),
                    });
                }
                Err(Error::Config(format!("unknown model `{other}` (use gaussian, gaussian_location, kef[-p], or a JSON spec)")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_forms() {
        let s: ModelSpec = serde_json::from_str(r#"{"kind":"gaussian"}"#).unwrap();
        assert_eq!(s.build().unwrap().param_dim(), 2);
        let s: ModelSpec =
            serde_json::from_str(r#"{"kind":"conditional_gaussian","dim":8,"gamma1":2.0,"gamma2":-0.5}"#).unwrap();
        let f = s.build().unwrap();
        assert_eq!((f.data_dim(), f.param_dim()), (8, 8));
        let s: ModelSpec = serde_json::from_str(
            r#"{"kind":"conditional_gaussian","dim":3,"edges":"all","gamma1":[0,0,0],"gamma2":-0.5}"#,
        )
        .unwrap();
        assert_eq!(s.build().unwrap().param_dim(), 3);
        let s: ModelSpec = serde_json::from_str(
            r#"{"kind":"conditional_gaussian","dim":3,"edges":[[0,2]],"gamma1":0,"gamma2":-0.5}"#,
        )
        .unwrap();
        assert_eq!(s.build().unwrap().param_dim(), 1);
        let s: ModelSpec = serde_json::from_str(r#"{"kind":"kef","rank":2}"#).unwrap();
        assert_eq!(s.build().unwrap().param_dim(), 2);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"kind":"kef","rank":2,"bogus":1}"#).is_err());
        assert_eq!(ModelSpec::from_name("kef-3").unwrap().build().unwrap().param_dim(), 3);
    }
}
