//! Parametric inference for the ultimate ruin probability of a Lévy-driven
//! insurance surplus process.
//!
//! The surplus is `R_t = u + c t + sigma W_t - S_t` with a subordinator `S`
//! drawn from one of three parametric families (compound Poisson with
//! exponential claims, its diffusion-perturbed variant, and a gamma
//! subordinator). The crate provides:
//!
//! - [`models`]: the families and their ladder/cumulant closed forms;
//! - [`lundberg`]: the adjustment-coefficient solver and the asymptotic
//!   variance of its plug-in estimator;
//! - [`cramer`]: the Cramér constant, tilted mean, Laplace transforms of the
//!   kernel gradient, and the delta-method scale `sigma*`;
//! - [`renewal`]: a trapezoidal Nyström solver for the defective renewal
//!   equation of the ruin probability and its parameter derivative, used as
//!   the independent numerical oracle;
//! - [`simulate`]: reproducible synthetic observation sets per family;
//! - [`estimate`]: maximum-likelihood and quadratic-variation estimators with
//!   plug-in covariance matrices;
//! - [`confidence`]: delta-method confidence intervals and Monte Carlo
//!   coverage experiments.

// `!(x > 0.0)` guards reject NaN along with non-positives, and fixed-size
// matrix algebra reads better with indexed loops.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod confidence;
pub mod cramer;
pub mod error;
pub mod estimate;
pub mod lundberg;
pub mod models;
pub mod quad;
pub mod renewal;
pub mod simulate;
pub mod special;

pub use confidence::{CoverageConfig, CoverageResult, IntervalReport, IntervalVariant};
pub use cramer::CramerSummary;
pub use error::{Error, Result};
pub use estimate::EstimateReport;
pub use lundberg::LundbergSolution;
pub use models::{Family, ModelSpec, ThetaVector};
pub use renewal::GridFunction;
pub use simulate::ObservationSet;
pub use special::{exp_integral_e1, inverse_normal_cdf, z_two_sided};
