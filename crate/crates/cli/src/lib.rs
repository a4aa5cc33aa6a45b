//! Command-line front end: run configuration, stage orchestration, manifests
//! and plot-ready exports.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod plot;

pub use cli::main_with_args;
pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{run_pipeline, RunManifest};
pub use plot::{emit_plot_data, PlotKind};
