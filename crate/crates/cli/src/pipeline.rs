//! Stage implementations shared by the subcommands and `run`.

use std::collections::BTreeMap;
use std::fs;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use scopula::copulas::{fit_pair_copula, pseudo_observations, CopulaFamily, FittedPair, PairFitOptions};
use scopula::data::{parse_station_table, StationDataset};
use scopula::marginals::{fit_lognormal_em, fit_vonmises_em, select_marginal, EmConfig, EmFit, MarginalModel, VmEmConfig};
use scopula::sbvc::{fit_sbvc_chains, predict_sbvc};
use scopula::sc::{fit_sc_model, interpolate_grid_sc, JointCopula, SCModel};
use scopula::spatial::{empirical_variogram, fit_variogram, hierarchical_cluster, ClusterModel, VariogramBin, VariogramFit, VariogramModel};
use scopula::validation::{cv_table_csv, fit_mean_variogram, idw, kfold_cv_many, station_targets, CVReport, KrigingSystem};

use crate::config::{Method, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{num, read_text, sha256_hex, OutDir, Table};

pub const MARGINAL_JSON: &str = "marginal.json";
pub const VARIOGRAM_JSON: &str = "variogram.json";
pub const VARIOGRAM_CSV: &str = "variogram_bins.csv";
pub const CLUSTERS_JSON: &str = "clusters.json";
pub const COPULA_JSON: &str = "copula.json";
pub const SURFACE_CSV: &str = "surface.csv";
pub const SURFACE_GEOJSON: &str = "surface.geojson";
pub const WEIGHTS_CSV: &str = "weights.csv";
pub const CHAIN_CSV: &str = "chain_trace.csv";
pub const POSTERIOR_JSON: &str = "posterior.json";
pub const CV_JSON: &str = "cv_report.json";
pub const CV_CSV: &str = "cv_table.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

pub fn load_dataset(cfg: &RunConfig) -> CliResult<StationDataset> {
    Ok(parse_station_table(&read_text(&cfg.input)?)?)
}

/// Mutable state threaded through the stages.
pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub ds: StationDataset,
    pub out: OutDir,
    pub variogram: Option<VariogramModel>,
    pub sc_model: Option<SCModel>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig, ds: StationDataset) -> CliResult<Context<'a>> {
        Ok(Context { cfg, ds, out: OutDir::create(&cfg.output_dir)?, variogram: None, sc_model: None })
    }

    fn target_index(&self) -> CliResult<usize> {
        Ok(self.ds.variable_index(&self.cfg.variables.target)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub ks: f64,
    pub n_obs: usize,
    pub em_iterations: Option<usize>,
    pub converged: bool,
    pub degenerate: bool,
}

impl From<&MarginalModel> for MarginalReport {
    fn from(m: &MarginalModel) -> Self {
        MarginalReport {
            family: format!("{:?}", m.family()),
            params: m.dist.params().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            loglik: m.loglik,
            aic: m.aic,
            bic: m.bic,
            ks: m.ks,
            n_obs: m.n_obs,
            em_iterations: m.em_iterations,
            converged: m.converged,
            degenerate: m.degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmTracePoint {
    pub iteration: usize,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalStage {
    pub variable: String,
    /// Best first.
    pub ranked: Vec<MarginalReport>,
    /// Log-normal EM on the daily values.
    pub em: MarginalReport,
    pub em_trace: Vec<EmTracePoint>,
    pub angular: Option<MarginalReport>,
}

fn trace(fit: &EmFit) -> Vec<EmTracePoint> {
    fit.trace.iter().map(|s| EmTracePoint { iteration: s.iteration, loglik: s.loglik_observed }).collect()
}

pub fn stage_fit_marginal(ctx: &mut Context) -> CliResult<()> {
    let v = ctx.target_index()?;
    let values = ctx.ds.pooled_values(v);
    let ranked = select_marginal(&values, &ctx.cfg.marginal_families()?, &EmConfig::default())?;
    let em = fit_lognormal_em(&values, &EmConfig::default())?;
    let angular = match &ctx.cfg.variables.angular {
        Some(name) => {
            let a = ctx.ds.variable_index(name)?;
            let rad: Vec<Option<f64>> = ctx.ds.pooled_values(a).into_iter().map(|x| x.map(|d| d.rem_euclid(360.0).to_radians())).collect();
            Some(MarginalReport::from(&fit_vonmises_em(&rad, &VmEmConfig::default())?.model))
        }
        None => None,
    };
    let stage = MarginalStage {
        variable: ctx.cfg.variables.target.clone(),
        ranked: ranked.iter().map(MarginalReport::from).collect(),
        em: MarginalReport::from(&em.model),
        em_trace: trace(&em),
        angular,
    };
    ctx.out.write_json(MARGINAL_JSON, &stage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramStage {
    pub variable: String,
    pub bins: Vec<VariogramBin>,
    pub fit: VariogramFit,
}

pub fn stage_variogram(ctx: &mut Context) -> CliResult<()> {
    let bins = empirical_variogram(&ctx.ds, &ctx.cfg.variables.target, ctx.cfg.variogram.bins)?;
    let fit = fit_variogram(&bins, &ctx.cfg.variogram_families()?)?;
    let mut t = Table::new(&["lag_m", "gamma", "n_pairs"]);
    for b in &bins {
        t.push(vec![num(b.lag), num(b.gamma), b.n_pairs.to_string()]);
    }
    ctx.variogram = Some(fit.model.clone());
    ctx.out.write_csv(VARIOGRAM_CSV, &t)?;
    ctx.out.write_json(VARIOGRAM_JSON, &VariogramStage { variable: ctx.cfg.variables.target.clone(), bins, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStage {
    pub k: usize,
    pub hd_cut: f64,
    pub assignments: BTreeMap<String, usize>,
    pub centers: Vec<(f64, f64)>,
    pub ssw_curve: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

impl From<&ClusterModel> for ClusterStage {
    fn from(cm: &ClusterModel) -> Self {
        ClusterStage {
            k: cm.k,
            hd_cut: cm.hd_cut,
            assignments: cm.station_ids.iter().cloned().zip(cm.assignments.iter().copied()).collect(),
            centers: cm.centers.clone(),
            ssw_curve: cm.ssw_curve.clone(),
            warnings: cm.warnings.clone(),
        }
    }
}

pub fn stage_cluster(ctx: &mut Context) -> CliResult<()> {
    let cfg = ctx.cfg.cluster_config()?;
    let vgm = ctx.variogram.clone();
    let acf = vgm.map(|m| move |h: f64| m.acf(h));
    let acf_ref: Option<&dyn Fn(f64) -> f64> = match (&acf, cfg.r_cut > 0.0) {
        (Some(f), true) => Some(f),
        (None, true) => return Err(CliError::validation("cluster.r_cut > 0 needs the variogram stage")),
        _ => None,
    };
    let cm = hierarchical_cluster(&ctx.ds.stations, &cfg, acf_ref)?;
    ctx.out.write_json(CLUSTERS_JSON, &ClusterStage::from(&cm))
}

fn sc_model<'c>(ctx: &'c mut Context<'_>) -> CliResult<&'c SCModel> {
    if ctx.sc_model.is_none() {
        let mut opts = ctx.cfg.sc_options()?;
        opts.variogram = ctx.variogram.clone();
        ctx.sc_model = Some(fit_sc_model(&ctx.ds, &ctx.cfg.variables.target, &opts)?);
    }
    Ok(ctx.sc_model.as_ref().expect("just fitted"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub variables: (String, String),
    pub family: String,
    pub rotation: u32,
    pub params: Vec<f64>,
    pub tau: f64,
    pub empirical_tau: f64,
    pub loglik: f64,
    pub aic: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub n_obs: usize,
}

impl PairReport {
    fn new(a: &str, b: &str, f: &FittedPair) -> PairReport {
        let (lambda_lower, lambda_upper) = f.copula.tail_coefficients();
        PairReport {
            variables: (a.into(), b.into()),
            family: format!("{:?}", f.copula.family),
            rotation: f.copula.rotation.degrees(),
            params: f.copula.params.clone(),
            tau: f.tau,
            empirical_tau: f.empirical_tau,
            loglik: f.loglik,
            aic: f.aic,
            lambda_lower,
            lambda_upper,
            n_obs: f.n_obs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaStage {
    /// Joint copula of `(F(lon), F(lat), F(y))` used by SC.
    pub joint: Option<JointCopula>,
    pub joint_loglik: Option<f64>,
    pub pair: Option<PairReport>,
}

/// Fit a pair copula to the co-observed daily records of two variables.
pub fn fit_variable_pair(ds: &StationDataset, a: &str, b: &str, families: &[CopulaFamily]) -> CliResult<PairReport> {
    let (ia, ib) = (ds.variable_index(a)?, ds.variable_index(b)?);
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for obs in ds.series.values().flatten() {
        if let (Some(x), Some(y)) = (obs.values[ia], obs.values[ib]) {
            xa.push(x);
            xb.push(y);
        }
    }
    if xa.len() < 3 {
        return Err(CliError::computation(format!("only {} co-observed records of `{a}` and `{b}`", xa.len())));
    }
    let fit = fit_pair_copula(&pseudo_observations(&xa), &pseudo_observations(&xb), families, &PairFitOptions::default())?;
    Ok(PairReport::new(a, b, &fit))
}

pub fn stage_fit_copula(ctx: &mut Context) -> CliResult<()> {
    let m = sc_model(ctx)?;
    let (joint, ll) = (m.joint.clone(), m.joint_loglik);
    let pair = match &ctx.cfg.variables.angular {
        Some(a) => Some(fit_variable_pair(&ctx.ds, &ctx.cfg.variables.target, a, &CopulaFamily::ALL)?),
        None => None,
    };
    ctx.out.write_json(COPULA_JSON, &CopulaStage { joint: Some(joint), joint_loglik: Some(ll), pair })
}

fn surface_table() -> Table {
    Table::new(&["lon", "lat", "value", "region_id", "mode"])
}

fn geojson(rows: &[Vec<String>]) -> serde_json::Value {
    let features: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [r[0].parse::<f64>().unwrap_or(f64::NAN), r[1].parse::<f64>().unwrap_or(f64::NAN)] },
                "properties": { "value": r[2].parse::<f64>().ok(), "region_id": r[3], "mode": r[4] },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn stage_interpolate(ctx: &mut Context) -> CliResult<()> {
    let points = ctx.cfg.grid_spec(&ctx.ds)?.points();
    let mut table = surface_table();
    let method = ctx.cfg.method()?;
    match method {
        Method::Sc => {
            let emit_weights = ctx.cfg.interpolate.emit_weights;
            let model = sc_model(ctx)?;
            let mode = model.cfg.mode.to_string();
            let grid = interpolate_grid_sc(model, &points);
            let mut weights = Table::new(&["point", "lon", "lat", "station_id", "alpha", "d", "rho", "fallback"]);
            for gp in &grid.points {
                match &gp.prediction {
                    Some(p) => {
                        table.push(vec![num(gp.lon), num(gp.lat), num(p.value), p.region_id.clone(), mode.clone()]);
                        for e in &p.weights.entries {
                            weights.push(vec![
                                gp.index.to_string(),
                                num(gp.lon),
                                num(gp.lat),
                                e.station_id.clone(),
                                num(e.alpha),
                                num(e.d),
                                num(e.rho),
                                p.weights.fallback.to_string(),
                            ]);
                        }
                    }
                    None => table.push(vec![num(gp.lon), num(gp.lat), "NA".into(), String::new(), mode.clone()]),
                }
            }
            if emit_weights {
                ctx.out.write_csv(WEIGHTS_CSV, &weights)?;
            }
        }
        Method::Sbvc => {
            let targets = ctx.cfg.targets();
            let (model, chains) = fit_sbvc_chains(&ctx.ds, &targets, &ctx.cfg.sbvc_config()?, ctx.cfg.sbvc.chains)?;
            let preds: Vec<Option<f64>> =
                points.par_iter().map(|&p| predict_sbvc(p, &model).ok().map(|r| r.values[0].1)).collect();
            for (p, v) in points.iter().zip(preds) {
                table.push(vec![num(p.0), num(p.1), v.map_or("NA".into(), num), String::new(), "sbvc".into()]);
            }
            let names: Vec<String> = model.vine.edges().map(|e| format!("{}-{}", e.conditioned.0, e.conditioned.1)).collect();
            let mut trace = Table::new(&["chain", "iteration", "parameter", "value", "log_posterior"]);
            for (c, chain) in chains.iter().enumerate() {
                for (i, d) in chain.draws.iter().enumerate() {
                    let it = chain.burn_in + i;
                    for (j, x) in d.iter().enumerate() {
                        trace.push(vec![c.to_string(), it.to_string(), format!("theta{j}"), num(*x), num(chain.log_posterior[it])]);
                    }
                }
            }
            ctx.out.write_csv(CHAIN_CSV, &trace)?;
            let acceptance: Vec<f64> = chains.iter().map(|c| c.acceptance_rate).collect();
            let warnings: Vec<&String> = chains.iter().flat_map(|c| &c.warnings).collect();
            ctx.out.write_json(
                POSTERIOR_JSON,
                &json!({
                    "targets": model.targets,
                    "edges": names,
                    "vine": model.vine,
                    "mle_params": model.mle_params,
                    "theta_hat": model.theta_hat,
                    "chains": chains.len(),
                    "acceptance_rate": acceptance,
                    "warnings": warnings,
                }),
            )?;
        }
        Method::Ok | Method::Idw => {
            let v = ctx.target_index()?;
            let st: Vec<((f64, f64), f64)> = station_targets(&ctx.ds, v).into_iter().map(|s| (s.1, s.2)).collect();
            let tag = if method == Method::Ok { "ok" } else { "idw" };
            let values: Vec<Option<f64>> = if method == Method::Ok {
                let vgm = fit_mean_variogram(&st, &ctx.cfg.variogram_families()?, ctx.cfg.variogram.bins)?;
                let sys = KrigingSystem::new(&st, &vgm)?;
                points.par_iter().map(|&p| sys.predict(p).ok().map(|r| r.value)).collect()
            } else {
                let pw = ctx.cfg.interpolate.idw_power;
                points.par_iter().map(|&p| idw(p, &st, pw).ok()).collect()
            };
            for (p, v) in points.iter().zip(values) {
                table.push(vec![num(p.0), num(p.1), v.map_or("NA".into(), num), String::new(), tag.into()]);
            }
        }
    }
    ctx.out.write_csv(SURFACE_CSV, &table)?;
    if ctx.cfg.interpolate.geojson {
        ctx.out.write_json(SURFACE_GEOJSON, &geojson(&table.rows))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvStage {
    pub variable: String,
    /// `YYYY-MM` span of the records the station means are taken over.
    pub period: String,
    pub reports: Vec<CVReport>,
}

fn period_label(ds: &StationDataset) -> String {
    let dates = ds.dates();
    match (dates.first(), dates.last()) {
        (Some(a), Some(b)) => {
            let (a, b) = (a.format("%Y-%m").to_string(), b.format("%Y-%m").to_string());
            if a == b {
                a
            } else {
                format!("{a}/{b}")
            }
        }
        _ => "none".into(),
    }
}

pub fn stage_validate(ctx: &mut Context) -> CliResult<()> {
    let c = &ctx.cfg.validate;
    let reports = kfold_cv_many(&ctx.ds, &ctx.cfg.variables.target, &ctx.cfg.cv_methods()?, c.k, c.seed, &ctx.cfg.cv_options()?)?;
    ctx.out.write(CV_CSV, cv_table_csv(&reports).as_bytes())?;
    let stage = CvStage { variable: ctx.cfg.variables.target.clone(), period: period_label(&ctx.ds), reports };
    ctx.out.write_json(CV_JSON, &stage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    /// `ok`, `failed` or `skipped`.
    pub status: String,
    pub error: Option<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub input_sha256: String,
    pub versions: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<OutputFile>,
    pub failed_stage: Option<String>,
}

type Stage = fn(&mut Context) -> CliResult<()>;

pub const STAGES: [&str; 6] = ["fit-marginal", "variogram", "cluster", "fit-copula", "interpolate", "validate"];

/// Run every stage in order and write `manifest.json` last. Validation
/// problems are reported before any output is written; a failing stage is
/// recorded in the manifest and the outputs of earlier stages are kept.
pub fn run_pipeline(cfg: &RunConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let input = fs::read(&cfg.input).map_err(|e| CliError::validation(format!("cannot read {}: {e}", cfg.input.display())))?;
    let ds = load_dataset(cfg)?;
    cfg.validate_against(&ds)?;

    let mut ctx = Context::new(cfg, ds)?;
    let stages: [(&str, Stage); 6] = [
        (STAGES[0], stage_fit_marginal),
        (STAGES[1], stage_variogram),
        (STAGES[2], stage_cluster),
        (STAGES[3], stage_fit_copula),
        (STAGES[4], stage_interpolate),
        (STAGES[5], stage_validate),
    ];
    let mut records = Vec::new();
    let mut failure: Option<(String, CliError)> = None;
    for (name, run) in stages {
        if failure.is_some() || (name == "validate" && !cfg.validate.enabled) {
            records.push(StageRecord { name: name.into(), seconds: 0.0, status: "skipped".into(), error: None, outputs: vec![] });
            continue;
        }
        let before = ctx.out.written.len();
        let t = Instant::now();
        let r = run(&mut ctx);
        let outputs = ctx.out.written[before..].to_vec();
        let seconds = t.elapsed().as_secs_f64();
        match r {
            Ok(()) => records.push(StageRecord { name: name.into(), seconds, status: "ok".into(), error: None, outputs }),
            Err(e) => {
                records.push(StageRecord { name: name.into(), seconds, status: "failed".into(), error: Some(e.to_string()), outputs });
                failure = Some((name.to_string(), e));
            }
        }
    }

    let mut outputs = Vec::new();
    for f in &ctx.out.written {
        let bytes = fs::read(ctx.out.root.join(f)).map_err(|e| CliError::computation(format!("cannot re-read {f}: {e}")))?;
        outputs.push(OutputFile { file: f.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
    }
    let mut seeds = BTreeMap::new();
    seeds.insert("sbvc".to_string(), cfg.sbvc.seed);
    seeds.insert("validate".to_string(), cfg.validate.seed);
    if cfg.grid.kind == "random" {
        seeds.insert("grid".to_string(), cfg.grid.seed);
    }
    let versions = BTreeMap::from([
        ("scopula".to_string(), scopula::VERSION.to_string()),
        ("scopula-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ]);
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        input_sha256: sha256_hex(&input),
        versions,
        seeds,
        stages: records,
        outputs,
        failed_stage: failure.as_ref().map(|f| f.0.clone()),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::computation(e.to_string()))?;
    text.push('\n');
    fs::write(ctx.out.root.join(MANIFEST_JSON), text).map_err(|e| CliError::computation(format!("cannot write manifest: {e}")))?;
    match failure {
        Some((stage, e)) => Err(CliError::computation(format!("stage `{stage}` failed: {e}"))),
        None => Ok(manifest),
    }
}
