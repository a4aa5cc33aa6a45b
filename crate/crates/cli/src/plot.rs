//! Plot-ready tables derived from stage outputs.

use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};
use crate::output::{num, parse_rows, read_text, Table};
use crate::pipeline::{CvStage, MarginalStage, VariogramStage, CHAIN_CSV, CV_JSON, MARGINAL_JSON, SURFACE_CSV, VARIOGRAM_JSON};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Variogram,
    Acf,
    EmTrace,
    ChainTrace,
    Surface,
    CvBars,
}

impl FromStr for PlotKind {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<PlotKind> {
        Ok(match s.replace('-', "_").as_str() {
            "variogram" => PlotKind::Variogram,
            "acf" => PlotKind::Acf,
            "em_trace" => PlotKind::EmTrace,
            "chain_trace" => PlotKind::ChainTrace,
            "surface" => PlotKind::Surface,
            "cv_bars" => PlotKind::CvBars,
            other => {
                return Err(CliError::validation(format!(
                    "unknown plot kind `{other}` (variogram, acf, em_trace, chain_trace, surface, cv_bars)"
                )))
            }
        })
    }
}

/// File and the subcommand that produces it.
fn prerequisite(kind: PlotKind) -> (&'static str, &'static str) {
    match kind {
        PlotKind::Variogram | PlotKind::Acf => (VARIOGRAM_JSON, "variogram"),
        PlotKind::EmTrace => (MARGINAL_JSON, "fit-marginal"),
        PlotKind::ChainTrace => (CHAIN_CSV, "interpolate --method sbvc"),
        PlotKind::Surface => (SURFACE_CSV, "interpolate"),
        PlotKind::CvBars => (CV_JSON, "validate"),
    }
}

fn stage_text(dir: &Path, kind: PlotKind) -> CliResult<String> {
    let (file, cmd) = prerequisite(kind);
    let path = dir.join(file);
    if !path.exists() {
        return Err(CliError::validation(format!("{} not found; run `scopula {cmd}` first", path.display())));
    }
    read_text(&path)
}

fn stage_json<T: DeserializeOwned>(dir: &Path, kind: PlotKind) -> CliResult<T> {
    serde_json::from_str(&stage_text(dir, kind)?).map_err(|e| CliError::validation(format!("{}: {e}", prerequisite(kind).0)))
}

pub fn emit_plot_data(dir: &Path, kind: PlotKind) -> CliResult<Table> {
    match kind {
        PlotKind::Variogram => {
            let v: VariogramStage = stage_json(dir, kind)?;
            let mut t = Table::new(&["lag_m", "gamma_empirical", "gamma_model", "n_pairs"]);
            for b in &v.bins {
                t.push(vec![num(b.lag), num(b.gamma), num(v.fit.model.gamma(b.lag)), b.n_pairs.to_string()]);
            }
            Ok(t)
        }
        PlotKind::Acf => {
            let v: VariogramStage = stage_json(dir, kind)?;
            let max_lag = v.bins.iter().map(|b| b.lag).fold(0.0, f64::max).max(1.0);
            let mut t = Table::new(&["lag_m", "acf"]);
            for i in 0..=50 {
                let h = max_lag * i as f64 / 50.0;
                t.push(vec![num(h), num(v.fit.model.acf(h))]);
            }
            Ok(t)
        }
        PlotKind::EmTrace => {
            let m: MarginalStage = stage_json(dir, kind)?;
            let mut t = Table::new(&["iteration", "loglik"]);
            for p in &m.em_trace {
                t.push(vec![p.iteration.to_string(), num(p.loglik)]);
            }
            Ok(t)
        }
        PlotKind::ChainTrace => {
            let rows = parse_rows(&stage_text(dir, kind)?);
            Ok(Table { columns: vec!["chain", "iteration", "parameter", "value", "log_posterior"], rows })
        }
        PlotKind::Surface => {
            let rows = parse_rows(&stage_text(dir, kind)?);
            let mut t = Table::new(&["lon", "lat", "value"]);
            for r in rows {
                t.push(r.into_iter().take(3).collect());
            }
            Ok(t)
        }
        PlotKind::CvBars => {
            let cv: CvStage = stage_json(dir, kind)?;
            let mut t = Table::new(&["period", "method", "metric", "value"]);
            for r in &cv.reports {
                t.push(vec![cv.period.clone(), r.method.clone(), "MAE".into(), num(r.mae)]);
                t.push(vec![cv.period.clone(), r.method.clone(), "RMSE".into(), num(r.rmse)]);
            }
            Ok(t)
        }
    }
}
