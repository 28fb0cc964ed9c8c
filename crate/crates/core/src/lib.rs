//! Goodness-of-fit testing for composite parametric nulls with the
//! semiparametric kernel Stein discrepancy (SKSD).
//!
//! The statistic only needs the model score `∇ₓ log p_θ(x)`, so it applies
//! to models whose normalizing constant is intractable. Calibration is by
//! parametric bootstrap: refit the nuisance parameter on every resample drawn
//! from the fitted model and recompute the statistic.
//!
//! Module map:
//!
//! | module | contents |
//! |---|---|
//! | [`kernels`] | Gaussian / linear kernels, derivatives, median heuristic |
//! | [`models`] | score-based families (Gaussian, kernel exponential family, conditional Gaussian) |
//! | [`stein`] | Stein kernel and the V/U statistics, O(n) linear-kernel path |
//! | [`estimators`] | MLE, closed-form min-KSD and score matching, simplex min-KSD |
//! | [`samplers`] | MALA, Gibbs, and the experiment data-generating processes |
//! | [`bootstrap`] | parametric bootstrap test and the Neyman-orthogonal wild bootstrap test |
//! | [`baselines`] | KS, Wasserstein-1, MMD, Anderson–Darling, Lilliefors, likelihood ratio |
//! | [`harness`] | configuration, experiment runner, CSV/JSON output |

pub mod baselines;
pub mod bootstrap;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod models;
pub mod sample;
pub mod samplers;
pub mod seed;
pub mod special;
pub mod stein;

pub use bootstrap::{bootstrap_calibrate, sksd_test, BootstrapOptions, PValueConvention, TestReport};
pub use error::{Error, Result};
pub use estimators::{Estimator, EstimatorSpec};
pub use kernels::{Bandwidth, KernelChoice, KernelKind, KernelSpec};
pub use models::{AffineScoreDecomposition, ModelFamily, ModelSpec, ParamBox};
pub use sample::SampleBatch;
pub use samplers::{ChainConfig, DgpSpec, Distribution};
pub use stein::{StatForm, SteinStatistic};
