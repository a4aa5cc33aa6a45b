//! Bayesian vine-copula interpolation: priors, random-walk Metropolis over
//! vine parameters, and conditional-mean prediction at new coordinates.

pub mod mcmc;
pub mod model;
pub mod prior;

pub use mcmc::{chain_diagnostics, metropolis_hastings, posterior_estimate, tune_proposal, ChainDiagnostics, Loss, PosteriorChain};
pub use model::{
    conditional_mean, fit_sbvc_chains, fit_sbvc_model, predict_sbvc, sample_posterior, ConditionalMean, SBVCConfig, SBVCModel,
    SBVCPrediction, MIN_MASS,
};
pub use prior::{log_posterior, Prior, PriorSpec};
