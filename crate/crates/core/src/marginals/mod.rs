//! Univariate marginals: parametric families, EM under missing data,
//! Von-Mises moment estimators, KDE and AIC-based selection.

pub mod dist;
pub mod em;
pub mod kde;
pub mod mle;
pub mod select;
pub mod vonmises;

pub use dist::{ks_statistic, Family, Marginal, MarginalModel};
pub use em::{fit_lognormal_em, fit_lognormal_em_from, lognormal_mle, EmConfig, EmFit, EmState};
pub use kde::{kde_distribution, Bandwidth, Kde};
pub use mle::fit_family_mle;
pub use select::{fit_candidate, select_marginal};
pub use vonmises::{fit_vonmises_em, fit_vonmises_umvue, invert_mean_resultant, trig_variances, VMFit, VmEmConfig};
