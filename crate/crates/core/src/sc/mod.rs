//! Spatial-copula interpolation: conditional densities at stations, density
//! and distance based weights, and grid prediction over cluster regions.

pub mod conditional;
pub mod joint;
pub mod model;
pub mod weights;

pub use conditional::{
    clayton_conditional_cdf, conditional_density_at, haversine_term, lp_distance, lp_distance_tabulated, separation_degree,
    station_conditional, CoordMargins, PredictionMode, SCConfig, StationConditional, YGrid,
};
pub use joint::{clayton_conditional_cdf_closed, clayton_ln_density, fit_joint, fit_joint_clayton, fit_joint_cvine, JointCopula, JointKind};
pub use model::{
    combine, fit_sc_model, interpolate_grid_sc, joint_records, neighbor_set, predict_sc, GridPoint, NeighborSet, Prediction,
    PredictionGrid, SCFitOptions, SCModel, UNCOVERED,
};
pub use weights::{normalize_weights, weights, WeightEntry, WeightVector};
