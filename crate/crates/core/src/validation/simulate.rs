use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use chrono::{Days, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Observation, StationDataset, StationRecord};
use crate::error::{Error, Result};
use crate::spatial::{haversine_m, GridSpec, VariogramModel};

/// Largest grid the dense Cholesky synthesis accepts.
pub const MAX_SIM_SITES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub grid: GridSpec,
    /// Covariance of the latent Gaussian field.
    pub variogram: VariogramModel,
    /// Log-scale location and scale of the marginal.
    pub mu: f64,
    pub sigma: f64,
    pub n_stations: usize,
    pub missing_rate: f64,
    /// Daily records per station.
    pub n_days: usize,
    /// Share of the latent variance that is static in time.
    pub omega: f64,
    pub variable: String,
    pub start_date: NaiveDate,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            grid: GridSpec::Regular { bbox: crate::spatial::BBox { lon_min: 76.84, lat_min: 28.40, lon_max: 77.35, lat_max: 28.88 }, nx: 32, ny: 32 },
            variogram: VariogramModel {
                family: crate::spatial::VariogramFamily::Matern,
                nugget: 0.0,
                sill: 1.0,
                range: 8000.0,
                kappa: 1.5,
            },
            mu: 4.3765,
            sigma: 0.7702,
            n_stations: 30,
            missing_rate: 0.0,
            n_days: 30,
            omega: 0.8,
            variable: "pm25".into(),
            start_date: NaiveDate::from_ymd_opt(2020, 11, 1).expect("valid date"),
        }
    }
}

/// A seeded realization: latent field and truth on the grid, plus a station
/// dataset sampled from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticField {
    pub config: SimConfig,
    pub sites: Vec<(f64, f64)>,
    /// Static latent Gaussian value per site.
    pub latent: Vec<f64>,
    /// Expected temporal mean per site.
    pub truth: Vec<f64>,
    /// Grid index of each station, in station-id order.
    pub station_sites: Vec<usize>,
    pub dataset: StationDataset,
}

type CholCache = Mutex<Vec<(String, Arc<DMatrix<f64>>)>>;

fn chol_cache() -> &'static CholCache {
    static CACHE: OnceLock<CholCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(Vec::new()))
}

/// Lower Cholesky factor of the site covariance, cached by grid and model.
fn cholesky_factor(grid: &GridSpec, model: &VariogramModel, sites: &[(f64, f64)]) -> Result<Arc<DMatrix<f64>>> {
    let key = format!("{grid:?}|{model:?}");
    if let Some(hit) = chol_cache().lock().expect("cache lock").iter().find(|e| e.0 == key) {
        return Ok(hit.1.clone());
    }
    let n = sites.len();
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        cov[(i, i)] = model.covariance(0.0);
        for j in 0..i {
            let c = model.covariance(haversine_m(sites[i], sites[j]));
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    let scale = model.total_sill();
    for jitter in [1e-10, 1e-8, 1e-6] {
        let mut m = cov.clone();
        for i in 0..n {
            m[(i, i)] += jitter * scale;
        }
        if let Some(c) = m.cholesky() {
            let l = Arc::new(c.l());
            let mut cache = chol_cache().lock().expect("cache lock");
            if cache.len() >= 4 {
                cache.remove(0);
            }
            cache.push((key, l.clone()));
            return Ok(l);
        }
    }
    Err(Error::numerical("site covariance is not positive definite even with jitter"))
}

/// Gaussian field by Cholesky synthesis, pushed through `Φ` and the
/// log-normal quantile (equivalently `exp(μ + σ g)`). Daily values mix the
/// static field with independent noise: `g = √ω Z(s) + √(1-ω) √C(0) ε`.
pub fn simulate_field(cfg: &SimConfig) -> Result<SyntheticField> {
    let sites = cfg.grid.points();
    let n = sites.len();
    if n > MAX_SIM_SITES {
        return Err(Error::Config(format!("{n} grid sites exceed the dense-synthesis limit of {MAX_SIM_SITES}; use a coarser grid")));
    }
    if !(0.0..1.0).contains(&cfg.missing_rate) {
        return Err(Error::Config(format!("missing_rate must lie in [0, 1), got {}", cfg.missing_rate)));
    }
    if !(0.0..=1.0).contains(&cfg.omega) {
        return Err(Error::Config(format!("omega must lie in [0, 1], got {}", cfg.omega)));
    }
    if !(cfg.sigma > 0.0 && cfg.mu.is_finite()) {
        return Err(Error::Config("log-normal sigma must be positive and mu finite".into()));
    }
    if cfg.n_stations == 0 || cfg.n_stations > n || cfg.n_days == 0 {
        return Err(Error::Config(format!("need 1..={n} stations and at least one day, got {} stations, {} days", cfg.n_stations, cfg.n_days)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.variogram.total_sill();
    let latent: Vec<f64> = if total > 0.0 {
        let l = cholesky_factor(&cfg.grid, &cfg.variogram, &sites)?;
        let e = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        (l.as_ref() * e).iter().copied().collect()
    } else {
        vec![0.0; n]
    };
    let (sw, sn) = (cfg.omega.sqrt(), ((1.0 - cfg.omega) * total).sqrt());
    let truth: Vec<f64> = latent
        .iter()
        .map(|z| (cfg.mu + cfg.sigma * sw * z + 0.5 * cfg.sigma * cfg.sigma * (1.0 - cfg.omega) * total).exp())
        .collect();

    let mut picked = sample(&mut rng, n, cfg.n_stations).into_vec();
    picked.sort_unstable();
    let width = cfg.n_stations.to_string().len().max(2);
    let mut stations = Vec::with_capacity(cfg.n_stations);
    let mut series = BTreeMap::new();
    for (k, &site) in picked.iter().enumerate() {
        let id = format!("S{:0width$}", k + 1);
        let (lon, lat) = sites[site];
        stations.push(StationRecord { station_id: id.clone(), lon, lat });
        let obs: Vec<Observation> = (0..cfg.n_days)
            .map(|d| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let y = (cfg.mu + cfg.sigma * (sw * latent[site] + sn * eps)).exp();
                let missing = rng.random::<f64>() < cfg.missing_rate;
                Observation { date: cfg.start_date + Days::new(d as u64), values: vec![(!missing).then_some(y)] }
            })
            .collect();
        series.insert(id, obs);
    }
    let dataset = StationDataset { stations, series, variables: vec![cfg.variable.clone()] };
    Ok(SyntheticField { config: cfg.clone(), sites, latent, truth, station_sites: picked, dataset })
}

impl SyntheticField {
    /// `lon,lat,truth,latent` rows for every grid site.
    pub fn truth_csv(&self) -> String {
        let mut out = String::from("# lon,lat,truth,latent\nlon,lat,truth,latent\n");
        for ((p, t), z) in self.sites.iter().zip(&self.truth).zip(&self.latent) {
            out.push_str(&format!("{},{},{},{}\n", p.0, p.1, t, z));
        }
        out
    }
}
