//! Spatial interpolation of skewed random fields with missing observations
//! through cluster-scoped conditional copulas.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: station CSV ingestion, missingness, temporal aggregation
//! - [`marginals`]: EM fits under missing data, Von-Mises UMVUE, family selection
//! - [`copulas`]: pair-copula families, Kendall's tau, tail dependence, C-vines
//! - [`spatial`]: haversine geometry, variograms, hierarchical clustering, regions
//! - [`sc`]: the classical spatial-copula interpolator
//! - [`sbvc`]: Bayesian vine-copula estimation and prediction
//! - [`validation`]: error metrics, cross-validation, kriging/IDW baselines,
//!   two-way ANOVA and the synthetic-field simulator

pub mod copulas;
pub mod data;
pub mod error;
pub mod marginals;
pub mod numeric;
pub mod sbvc;
pub mod sc;
pub mod spatial;
pub mod special;
pub mod validation;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
