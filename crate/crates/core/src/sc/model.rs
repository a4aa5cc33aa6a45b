use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{StationDataset, StationRecord};
use crate::error::{Error, Result};
use crate::marginals::{fit_candidate, EmConfig, Family, Marginal, MarginalModel};
use crate::spatial::{
    empirical_variogram, fit_variogram, haversine_m, hierarchical_cluster, nearest_cluster, presence_vector, ClusterConfig,
    ClusterModel, PresenceVector, VariogramFamily, VariogramModel,
};

use super::conditional::{argmax, station_conditional, CoordMargins, PredictionMode, SCConfig, StationConditional, YGrid};
use super::joint::{fit_joint, JointCopula, JointKind};
use super::weights::{weights, WeightVector};

/// Region label of points outside every cluster disc.
pub const UNCOVERED: &str = "UNCOVERED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCFitOptions {
    pub sc: SCConfig,
    pub cluster: ClusterConfig,
    pub joint: JointKind,
    pub y_family: Family,
    pub em: EmConfig,
    pub variogram_families: Vec<VariogramFamily>,
    pub variogram_bins: usize,
    /// Use this variogram instead of fitting one.
    pub variogram: Option<VariogramModel>,
    /// Padding of the coordinate margins as a fraction of the station span.
    pub coord_pad: f64,
}

impl Default for SCFitOptions {
    fn default() -> Self {
        SCFitOptions {
            sc: SCConfig::default(),
            cluster: ClusterConfig::default(),
            joint: JointKind::Clayton,
            y_family: Family::LogNormal,
            em: EmConfig::default(),
            variogram_families: VariogramFamily::ALL.to_vec(),
            variogram_bins: 12,
            variogram: None,
            coord_pad: 0.1,
        }
    }
}

/// Everything needed to predict at arbitrary points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCModel {
    pub variable: String,
    pub cfg: SCConfig,
    pub coord_margins: CoordMargins,
    pub pooled: MarginalModel,
    pub joint: JointCopula,
    pub joint_loglik: f64,
    pub variogram: VariogramModel,
    pub clusters: ClusterModel,
    pub grid: YGrid,
    /// Same order as `clusters.station_ids`.
    pub stations: Vec<StationConditional>,
    pub station_marginals: Vec<Marginal>,
    pub warnings: Vec<String>,
}

/// Copula-scale records `(F(lon), F(lat), F(y))` of every observed value.
pub fn joint_records(ds: &StationDataset, var: usize, cm: &CoordMargins, y: &Marginal) -> Vec<[f64; 3]> {
    let mut rows = Vec::new();
    for s in &ds.stations {
        let (u1, u2) = cm.transform(s.coords());
        for v in ds.station_values(&s.station_id, var).into_iter().flatten() {
            rows.push([u1, u2, y.cdf(v)]);
        }
    }
    rows
}

pub fn fit_sc_model(ds: &StationDataset, variable: &str, opts: &SCFitOptions) -> Result<SCModel> {
    opts.sc.validate()?;
    let var = ds.variable_index(variable)?;
    let mut warnings = Vec::new();
    let stations: Vec<StationRecord> = ds
        .stations
        .iter()
        .filter(|s| {
            let keep = ds.station_values(&s.station_id, var).iter().any(Option::is_some);
            if !keep {
                warnings.push(format!("station {} has no observed {variable} and is ignored", s.station_id));
            }
            keep
        })
        .cloned()
        .collect();
    if stations.is_empty() {
        return Err(Error::insufficient(format!("no station observes {variable}")));
    }

    let pooled = fit_candidate(opts.y_family, &ds.pooled_values(var), &opts.em)?;
    let coords: Vec<(f64, f64)> = stations.iter().map(|s| s.coords()).collect();
    let coord_margins = CoordMargins::around(&coords, opts.coord_pad)?;
    let rows = joint_records(ds, var, &coord_margins, &pooled.dist);
    let joint = fit_joint(opts.joint, &rows)?;
    let joint_loglik = joint.loglik(&rows);

    let variogram = match &opts.variogram {
        Some(v) => v.clone(),
        None => {
            let bins = empirical_variogram(ds, variable, opts.variogram_bins)?;
            let fit = fit_variogram(&bins, &opts.variogram_families)?;
            warnings.extend(fit.warnings.iter().cloned());
            fit.model
        }
    };
    let acf = |h: f64| variogram.acf(h);
    let clusters = hierarchical_cluster(&stations, &opts.cluster, (opts.cluster.r_cut > 0.0).then_some(&acf as &dyn Fn(f64) -> f64))?;
    warnings.extend(clusters.warnings.iter().cloned());

    let grid = YGrid::from_marginal(&pooled.dist, &opts.sc)?;
    let mut station_marginals = Vec::with_capacity(clusters.station_ids.len());
    let mut conds = Vec::with_capacity(clusters.station_ids.len());
    for (id, &p) in clusters.station_ids.iter().zip(&clusters.coords) {
        let vals = ds.station_values(id, var);
        let n_obs = vals.iter().flatten().count();
        let m = if n_obs >= opts.sc.min_station_obs {
            match fit_candidate(opts.y_family, &vals, &opts.em) {
                Ok(m) => m.dist,
                Err(e) => {
                    warnings.push(format!("station {id}: own marginal failed ({e}); using pooled"));
                    pooled.dist.clone()
                }
            }
        } else {
            pooled.dist.clone()
        };
        conds.push(station_conditional(&joint, &coord_margins, &m, id, p, &grid)?);
        station_marginals.push(m);
    }

    Ok(SCModel {
        variable: variable.to_string(),
        cfg: opts.sc.clone(),
        coord_margins,
        pooled,
        joint,
        joint_loglik,
        variogram,
        clusters,
        grid,
        stations: conds,
        station_marginals,
        warnings,
    })
}

/// Neighbor set of one point following the presence-vector rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub presence: PresenceVector,
    pub region_id: String,
    /// Deduplicated union of the member clusters' stations (indices into
    /// `SCModel::stations`), ascending.
    pub union: Vec<usize>,
    /// The `n_neighbors` closest members of `union`, closest first.
    pub selected: Vec<usize>,
}

pub fn neighbor_set(point: (f64, f64), model: &SCModel) -> Result<NeighborSet> {
    let cm = &model.clusters;
    let presence = presence_vector(point, cm, cm.hd_cut);
    let (member_clusters, region_id) = if presence.uncovered() {
        if !model.cfg.uncovered_fallback {
            return Err(Error::insufficient(format!("point {point:?} lies outside every cluster")));
        }
        (vec![nearest_cluster(point, cm)], UNCOVERED.to_string())
    } else {
        (presence.clusters(), presence.id())
    };
    let union: BTreeSet<usize> = (0..cm.station_ids.len()).filter(|&i| member_clusters.contains(&cm.assignments[i])).collect();
    if union.is_empty() {
        return Err(Error::insufficient(format!("no stations available for point {point:?}")));
    }
    let union: Vec<usize> = union.into_iter().collect();
    let mut by_dist: Vec<(f64, usize)> = union.iter().map(|&i| (haversine_m(point, cm.coords[i]), i)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let selected = by_dist.into_iter().take(model.cfg.n_neighbors).map(|p| p.1).collect();
    Ok(NeighborSet { presence, region_id, union, selected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub lon: f64,
    pub lat: f64,
    pub value: f64,
    pub method: PredictionMode,
    pub region_id: String,
    pub weights: WeightVector,
    pub mixture_argmax: f64,
    pub weighted_mode: f64,
}

/// Combine station densities with given weights; returns `(mixture argmax,
/// weighted mode)`.
pub fn combine(stations: &[&StationConditional], w: &WeightVector) -> (f64, f64) {
    let grid = stations[0].grid;
    let mut mix = vec![0.0; grid.n];
    let mut weighted = 0.0;
    for (s, e) in stations.iter().zip(&w.entries) {
        for (m, d) in mix.iter_mut().zip(&s.density) {
            *m += e.alpha * d;
        }
        weighted += e.alpha * s.mode;
    }
    let ys = grid.values();
    (ys[argmax(&mix)], weighted.clamp(grid.min, grid.max))
}

pub fn predict_sc(point: (f64, f64), model: &SCModel) -> Result<Prediction> {
    let ns = neighbor_set(point, model)?;
    let un = station_conditional(&model.joint, &model.coord_margins, &model.pooled.dist, "", point, &model.grid)?;
    let neigh: Vec<&StationConditional> = ns.selected.iter().map(|&i| &model.stations[i]).collect();
    let w = weights(&un, &neigh, &model.variogram, &model.pooled.dist, &model.cfg)?;
    let (mixture_argmax, weighted_mode) = combine(&neigh, &w);
    let value = match model.cfg.mode {
        PredictionMode::MixtureArgmax => mixture_argmax,
        PredictionMode::WeightedMode => weighted_mode,
    };
    Ok(Prediction {
        lon: point.0,
        lat: point.1,
        value,
        method: model.cfg.mode,
        region_id: ns.region_id,
        weights: w,
        mixture_argmax,
        weighted_mode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub lon: f64,
    pub lat: f64,
    pub prediction: Option<Prediction>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionGrid {
    pub points: Vec<GridPoint>,
}

impl PredictionGrid {
    pub fn n_failed(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

/// Predict every point in parallel; failures are recorded per point.
pub fn interpolate_grid_sc(model: &SCModel, points: &[(f64, f64)]) -> PredictionGrid {
    let points = points
        .par_iter()
        .enumerate()
        .map(|(index, &p)| match predict_sc(p, model) {
            Ok(pred) => GridPoint { index, lon: p.0, lat: p.1, prediction: Some(pred), error: None },
            Err(e) => GridPoint { index, lon: p.0, lat: p.1, prediction: None, error: Some(e.to_string()) },
        })
        .collect();
    PredictionGrid { points }
}
