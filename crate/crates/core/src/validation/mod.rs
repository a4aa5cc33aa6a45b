//! Error metrics, station-level cross-validation, kriging and IDW
//! baselines, two-way ANOVA and the synthetic-field simulator.

pub mod anova;
pub mod cv;
pub mod folds;
pub mod kriging;
pub mod metrics;
pub mod simulate;

pub use anova::{two_way_anova, wind_sector, AnovaRow, AnovaTable};
pub use cv::{cv_table_csv, fit_mean_variogram, kfold_cv, kfold_cv_many, station_targets, CVReport, CvMethod, CvOptions, CvPrediction, FoldResult};
pub use folds::kfold_assignments;
pub use kriging::{idw, ordinary_kriging, KrigingResult, KrigingSystem, COINCIDENT_M, KRIGING_JITTER};
pub use metrics::{mae, rmse};
pub use simulate::{simulate_field, SimConfig, SyntheticField, MAX_SIM_SITES};
