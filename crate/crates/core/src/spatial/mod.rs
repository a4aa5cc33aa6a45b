//! Geodesic distance, variograms, hierarchical spatial clustering and the
//! presence-vector regions built on top of it.

pub mod cluster;
pub mod geo;
pub mod grid;
pub mod regions;
pub mod variogram;

pub use cluster::{choose_k_elbow, hierarchical_cluster, ClusterConfig, ClusterModel, ElbowChoice, Merge};
pub use grid::{BBox, GridSpec};
pub use geo::{central_angle, haversine_m, tangent_plane, EARTH_RADIUS_M};
pub use regions::{nearest_cluster, presence_vector, regions, station_regions, PresenceVector, Region, RegionSet};
pub use variogram::{
    acf, empirical_variogram, empirical_variogram_from, fit_variogram, matern_correlation, VariogramBin,
    VariogramFamily, VariogramFit, VariogramModel,
};
