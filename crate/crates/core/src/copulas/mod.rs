//! Pair copulas, Kendall's tau, tail dependence and C-vines.

pub mod family;
pub mod fit;
pub mod kendall;
pub mod tail;
pub mod vine;

pub use family::{boundary_clamp_count, CopulaFamily, PairCopula, Rotation};
pub use fit::{fit_all_candidates, fit_family, fit_pair_copula, pseudo_observations, FittedPair, PairFitOptions};
pub use kendall::{independence_pvalue, kendall_tau};
pub use tail::{default_tail_grid, empirical_tail_dependence, tail_dependence, TailDependence};
pub use vine::{build_cvine, vine_conditional_cdf, vine_density, VineEdge, VineSpec};
