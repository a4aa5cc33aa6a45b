use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::StationDataset;
use crate::error::{Error, Result};
use crate::sbvc::{fit_sbvc_model, predict_sbvc, SBVCConfig};
use crate::sc::{fit_sc_model, predict_sc, PredictionMode, SCFitOptions};
use crate::spatial::{empirical_variogram_from, fit_variogram, VariogramFamily, VariogramModel};

use super::folds::kfold_assignments;
use super::kriging::{idw, KrigingSystem};
use super::metrics::{mae, rmse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CvMethod {
    Sc(PredictionMode),
    Sbvc,
    Ok,
    Idw,
}

impl CvMethod {
    pub fn tag(&self) -> String {
        match self {
            CvMethod::Sc(m) => format!("sc:{m}"),
            CvMethod::Sbvc => "sbvc".into(),
            CvMethod::Ok => "ok".into(),
            CvMethod::Idw => "idw".into(),
        }
    }
}

impl std::str::FromStr for CvMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Ok(match s.as_str() {
            "sc" => CvMethod::Sc(PredictionMode::MixtureArgmax),
            "sbvc" => CvMethod::Sbvc,
            "ok" | "kriging" => CvMethod::Ok,
            "idw" => CvMethod::Idw,
            _ => match s.strip_prefix("sc:") {
                Some(mode) => CvMethod::Sc(mode.parse()?),
                None => return Err(Error::Config(format!("unknown method `{s}`"))),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub sc: SCFitOptions,
    pub sbvc: SBVCConfig,
    pub idw_power: f64,
    /// Refit the variogram on each fold's training stations; otherwise
    /// `variogram` is shared by every fold.
    pub refit_variogram: bool,
    pub variogram: Option<VariogramModel>,
    pub variogram_families: Vec<VariogramFamily>,
    pub variogram_bins: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            sc: SCFitOptions::default(),
            sbvc: SBVCConfig::default(),
            idw_power: 2.0,
            refit_variogram: true,
            variogram: None,
            variogram_families: VariogramFamily::ALL.to_vec(),
            variogram_bins: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_test: usize,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPrediction {
    pub station_id: String,
    pub fold: usize,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub method: String,
    pub k: usize,
    pub seed: u64,
    /// Fold of each station, in station-id order.
    pub folds: Vec<(String, usize)>,
    pub per_fold: Vec<FoldResult>,
    pub predictions: Vec<CvPrediction>,
    /// Pooled over every held-out station that was predicted; NaN (null in
    /// JSON) when no fold succeeded.
    #[serde(deserialize_with = "nan_if_null")]
    pub mae: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub rmse: f64,
    /// Some fold failed for this method.
    pub partial: bool,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Temporal mean of each station with at least one observed value, in
/// station-id order.
pub fn station_targets(ds: &StationDataset, var: usize) -> Vec<(String, (f64, f64), f64)> {
    let mut out: Vec<_> = ds
        .station_means(var)
        .into_iter()
        .filter_map(|(s, m)| m.map(|m| (s.station_id.clone(), s.coords(), m)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Variogram of station temporal means.
pub fn fit_mean_variogram(points: &[((f64, f64), f64)], families: &[VariogramFamily], n_bins: usize) -> Result<VariogramModel> {
    let coords: Vec<(f64, f64)> = points.iter().map(|p| p.0).collect();
    let series: Vec<Vec<Option<f64>>> = points.iter().map(|p| vec![Some(p.1)]).collect();
    let bins = empirical_variogram_from(&coords, &series, n_bins, None)?;
    Ok(fit_variogram(&bins, families)?.model)
}

type FoldOutput = Vec<(CvMethod, Result<Vec<f64>>)>;

fn run_fold(
    ds: &StationDataset,
    variable: &str,
    train: &[(String, (f64, f64), f64)],
    test: &[(String, (f64, f64), f64)],
    methods: &[CvMethod],
    opts: &CvOptions,
) -> FoldOutput {
    let train_pts: Vec<((f64, f64), f64)> = train.iter().map(|t| (t.1, t.2)).collect();
    let needs_vgm = methods.iter().any(|m| matches!(m, CvMethod::Sc(_) | CvMethod::Ok));
    let vgm: Result<VariogramModel> = if !needs_vgm {
        Err(Error::Config("unused".into()))
    } else if opts.refit_variogram || opts.variogram.is_none() {
        fit_mean_variogram(&train_pts, &opts.variogram_families, opts.variogram_bins)
    } else {
        Ok(opts.variogram.clone().expect("checked"))
    };
    let vgm_ok = || vgm.as_ref().cloned().map_err(|e| Error::numerical(format!("variogram fit failed: {e}")));
    let keep: BTreeSet<String> = train.iter().map(|t| t.0.clone()).collect();
    let train_ds = ds.subset(&keep);

    let sc_model = if methods.iter().any(|m| matches!(m, CvMethod::Sc(_))) {
        Some(vgm_ok().and_then(|v| {
            let o = SCFitOptions { variogram: Some(v), ..opts.sc.clone() };
            fit_sc_model(&train_ds, variable, &o)
        }))
    } else {
        None
    };
    methods
        .iter()
        .map(|&m| {
            let preds: Result<Vec<f64>> = match m {
                CvMethod::Idw => test.iter().map(|t| idw(t.1, &train_pts, opts.idw_power)).collect(),
                CvMethod::Ok => vgm_ok().and_then(|v| {
                    let sys = KrigingSystem::new(&train_pts, &v)?;
                    test.iter().map(|t| sys.predict(t.1).map(|r| r.value)).collect()
                }),
                CvMethod::Sc(mode) => match sc_model.as_ref().expect("fitted above") {
                    Ok(model) => test
                        .iter()
                        .map(|t| {
                            let p = predict_sc(t.1, model)?;
                            Ok(match mode {
                                PredictionMode::MixtureArgmax => p.mixture_argmax,
                                PredictionMode::WeightedMode => p.weighted_mode,
                            })
                        })
                        .collect(),
                    Err(e) => Err(Error::numerical(format!("SC fit failed: {e}"))),
                },
                CvMethod::Sbvc => fit_sbvc_model(&train_ds, &[variable], &opts.sbvc)
                    .and_then(|model| test.iter().map(|t| predict_sbvc(t.1, &model).map(|p| p.values[0].1)).collect()),
            };
            (m, preds)
        })
        .collect()
}

/// Station-level k-fold cross-validation of several methods on the same
/// folds. Each held-out station's target is its temporal mean. SC modes
/// share one fit per fold.
pub fn kfold_cv_many(ds: &StationDataset, variable: &str, methods: &[CvMethod], k: usize, seed: u64, opts: &CvOptions) -> Result<Vec<CVReport>> {
    let var = ds.variable_index(variable)?;
    let targets = station_targets(ds, var);
    let fold_of = kfold_assignments(targets.len(), k, seed)?;
    let mut reports: Vec<CVReport> = methods
        .iter()
        .map(|m| CVReport {
            method: m.tag(),
            k,
            seed,
            folds: targets.iter().zip(&fold_of).map(|(t, &f)| (t.0.clone(), f)).collect(),
            per_fold: Vec::new(),
            predictions: Vec::new(),
            mae: f64::NAN,
            rmse: f64::NAN,
            partial: false,
        })
        .collect();
    for fold in 0..k {
        let (test, train): (Vec<_>, Vec<_>) = targets.iter().cloned().zip(&fold_of).partition(|(_, &f)| f == fold);
        let test: Vec<_> = test.into_iter().map(|t| t.0).collect();
        let train: Vec<_> = train.into_iter().map(|t| t.0).collect();
        for (r, (_, out)) in reports.iter_mut().zip(run_fold(ds, variable, &train, &test, methods, opts)) {
            match out {
                Ok(pred) => {
                    let obs: Vec<f64> = test.iter().map(|t| t.2).collect();
                    r.per_fold.push(FoldResult {
                        fold,
                        n_test: test.len(),
                        mae: mae(&obs, &pred).ok(),
                        rmse: rmse(&obs, &pred).ok(),
                        error: None,
                    });
                    r.predictions.extend(test.iter().zip(pred).map(|(t, p)| CvPrediction {
                        station_id: t.0.clone(),
                        fold,
                        observed: t.2,
                        predicted: p,
                    }));
                }
                Err(e) => {
                    r.partial = true;
                    r.per_fold.push(FoldResult { fold, n_test: test.len(), mae: None, rmse: None, error: Some(e.to_string()) });
                }
            }
        }
    }
    for r in &mut reports {
        let obs: Vec<f64> = r.predictions.iter().map(|p| p.observed).collect();
        let pred: Vec<f64> = r.predictions.iter().map(|p| p.predicted).collect();
        if !obs.is_empty() {
            r.mae = mae(&obs, &pred)?;
            r.rmse = rmse(&obs, &pred)?;
        }
    }
    Ok(reports)
}

pub fn kfold_cv(ds: &StationDataset, variable: &str, method: CvMethod, k: usize, seed: u64, opts: &CvOptions) -> Result<CVReport> {
    Ok(kfold_cv_many(ds, variable, &[method], k, seed, opts)?.remove(0))
}

/// `method,metric,value` table (plus per-fold rows) for several reports.
pub fn cv_table_csv(reports: &[CVReport]) -> String {
    let mut out = String::from("# method,fold,metric,value (fold = all for pooled)\nmethod,fold,metric,value\n");
    for r in reports {
        out.push_str(&format!("{},all,mae,{}\n{},all,rmse,{}\n", r.method, r.mae, r.method, r.rmse));
        for f in &r.per_fold {
            let v = |x: Option<f64>| x.map_or("NA".to_string(), |v| v.to_string());
            out.push_str(&format!("{},{},mae,{}\n{},{},rmse,{}\n", r.method, f.fold, v(f.mae), r.method, f.fold, v(f.rmse)));
        }
    }
    out
}
