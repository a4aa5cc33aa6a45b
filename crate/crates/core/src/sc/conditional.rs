use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::Marginal;
use crate::numeric::{cumulative_trapezoid, integrate, linspace, trapezoid};
use crate::spatial::geo::haversine_a;

use super::joint::JointCopula;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    /// Grid argmax of the weighted mixture of station densities.
    MixtureArgmax,
    /// Weighted sum of the station modes.
    WeightedMode,
}

impl std::str::FromStr for PredictionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mixture-argmax" | "mixture" => Ok(PredictionMode::MixtureArgmax),
            "weighted-mode" | "weighted" => Ok(PredictionMode::WeightedMode),
            other => Err(Error::Config(format!("unknown prediction mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PredictionMode::MixtureArgmax => "mixture-argmax",
            PredictionMode::WeightedMode => "weighted-mode",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCConfig {
    /// Boundary adjustment added to every separation degree.
    pub epsilon: f64,
    /// Order of the density distance.
    pub p_norm: u32,
    /// Closest stations used per prediction.
    pub n_neighbors: usize,
    pub y_grid_points: usize,
    /// Quantile levels of the pooled marginal bounding the y grid.
    pub y_quantiles: (f64, f64),
    /// Points of the u-space grid for the density distance.
    pub lp_points: usize,
    pub mode: PredictionMode,
    /// Points outside every cluster disc borrow the nearest cluster.
    pub uncovered_fallback: bool,
    /// Stations with fewer observed records fall back to the pooled marginal.
    pub min_station_obs: usize,
}

impl Default for SCConfig {
    fn default() -> Self {
        SCConfig {
            epsilon: 0.4224,
            p_norm: 2,
            n_neighbors: 5,
            y_grid_points: 1024,
            y_quantiles: (0.001, 0.999),
            lp_points: 512,
            mode: PredictionMode::MixtureArgmax,
            uncovered_fallback: true,
            min_station_obs: 8,
        }
    }
}

impl SCConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be finite and nonnegative, got {}", self.epsilon)));
        }
        if self.p_norm == 0 || self.n_neighbors == 0 {
            return Err(Error::Config("p_norm and n_neighbors must be at least 1".into()));
        }
        if self.y_grid_points < 3 || self.lp_points < 3 {
            return Err(Error::Config("grids need at least 3 points".into()));
        }
        let (lo, hi) = self.y_quantiles;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!("y_quantiles must satisfy 0 < lo < hi < 1, got ({lo}, {hi})")));
        }
        Ok(())
    }
}

/// Evenly spaced evaluation grid for the target variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl YGrid {
    pub fn new(min: f64, max: f64, n: usize) -> Result<YGrid> {
        if !(min < max && min.is_finite() && max.is_finite()) || n < 3 {
            return Err(Error::Config(format!("invalid y grid ({min}, {max}, {n})")));
        }
        Ok(YGrid { min, max, n })
    }

    pub fn from_marginal(m: &Marginal, cfg: &SCConfig) -> Result<YGrid> {
        YGrid::new(m.quantile(cfg.y_quantiles.0), m.quantile(cfg.y_quantiles.1), cfg.y_grid_points)
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.n)
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    /// Linear interpolation of a tabulation; zero outside the grid.
    pub fn interpolate(&self, table: &[f64], y: f64) -> f64 {
        if !(y >= self.min && y <= self.max) {
            return 0.0;
        }
        let t = (y - self.min) / self.step();
        let i = (t.floor() as usize).min(self.n - 2);
        let w = t - i as f64;
        table[i] * (1.0 - w) + table[i + 1] * w
    }
}

/// Uniform margins of the two coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordMargins {
    pub lon: Marginal,
    pub lat: Marginal,
}

impl CoordMargins {
    /// Station bounding box widened by `pad` of its span on each side.
    pub fn around(points: &[(f64, f64)], pad: f64) -> Result<CoordMargins> {
        let b = crate::spatial::BBox::around(points).ok_or_else(|| Error::insufficient("no station coordinates"))?;
        let wx = ((b.lon_max - b.lon_min) * pad).max(1e-3);
        let wy = ((b.lat_max - b.lat_min) * pad).max(1e-3);
        Ok(CoordMargins {
            lon: Marginal::Uniform { lo: b.lon_min - wx, hi: b.lon_max + wx },
            lat: Marginal::Uniform { lo: b.lat_min - wy, hi: b.lat_max + wy },
        })
    }

    pub fn transform(&self, p: (f64, f64)) -> (f64, f64) {
        (self.lon.cdf(p.0), self.lat.cdf(p.1))
    }
}

/// Tabulated `f(y | lon, lat)` at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConditional {
    pub station_id: String,
    pub coords: (f64, f64),
    pub grid: YGrid,
    /// Normalized to integrate to one over the grid.
    pub density: Vec<f64>,
    pub cdf: Vec<f64>,
    pub mode: f64,
    /// Mass captured by the grid before normalization.
    pub mass: f64,
}

/// Unnormalized conditional density at one `y`:
/// `c3(F1(x1), F2(x2), F_Y(y)) / c2(F1(x1), F2(x2)) · f_Y(y)`.
pub fn conditional_density_at(joint: &JointCopula, cm: &CoordMargins, y_marg: &Marginal, point: (f64, f64), y: f64) -> Result<f64> {
    let (u1, u2) = cm.transform(point);
    let f = y_marg.pdf(y);
    if f <= 0.0 {
        return Ok(0.0);
    }
    Ok(joint.conditional_density(u1, u2, y_marg.cdf(y))? * f)
}

/// Index of the first maximum (ties go to the smaller `y`).
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn station_conditional(
    joint: &JointCopula,
    cm: &CoordMargins,
    y_marg: &Marginal,
    station_id: &str,
    point: (f64, f64),
    grid: &YGrid,
) -> Result<StationConditional> {
    let (u1, u2) = cm.transform(point);
    let c2 = joint.coord_density(u1, u2);
    if !(c2 >= super::joint::MIN_COORD_DENSITY) {
        return Err(Error::numerical(format!("coordinate copula density {c2:e} is near-singular at {point:?}")));
    }
    let ys = grid.values();
    let mut density = Vec::with_capacity(ys.len());
    for &y in &ys {
        let f = y_marg.pdf(y);
        density.push(if f > 0.0 { joint.conditional_density(u1, u2, y_marg.cdf(y))? * f } else { 0.0 });
    }
    let mass = trapezoid(&ys, &density);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::numerical(format!("conditional density at {point:?} has no mass on the y grid")));
    }
    density.iter_mut().for_each(|d| *d /= mass);
    let mut cdf = cumulative_trapezoid(&ys, &density);
    let mut run = 0.0f64;
    for c in &mut cdf {
        run = run.max(*c);
        *c = run;
    }
    let mode = ys[argmax(&density)];
    Ok(StationConditional { station_id: station_id.to_string(), coords: point, grid: *grid, density, cdf, mode, mass })
}

/// `F(y | x1, x2)` under a trivariate Clayton joint, by integrating the
/// conditional density in the copula scale and normalizing.
pub fn clayton_conditional_cdf(theta: f64, x1: f64, x2: f64, y: f64, cm: &CoordMargins, y_marg: &Marginal) -> Result<f64> {
    let joint = JointCopula::clayton(theta)?;
    let (u1, u2) = cm.transform((x1, x2));
    let c2 = joint.coord_density(u1, u2);
    if !(c2 >= super::joint::MIN_COORD_DENSITY) {
        return Err(Error::numerical(format!("coordinate copula density {c2:e} is near-singular")));
    }
    let f = |t: f64| joint.conditional_density(u1, u2, t).unwrap_or(0.0);
    let top = y_marg.cdf(y);
    let num = integrate(f, 0.0, top, 1e-12, 1e-10);
    let den = integrate(f, 0.0, 1.0, 1e-12, 1e-10);
    if !(den > 0.0) {
        return Err(Error::numerical("conditional density integrates to zero"));
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// `(∫ |fa - fb|^p du)^(1/p)` by the trapezoid rule on `u`.
pub fn lp_distance_tabulated(fa: &[f64], fb: &[f64], u: &[f64], p: u32) -> f64 {
    let diff: Vec<f64> = fa.iter().zip(fb).map(|(a, b)| (a - b).abs().powi(p as i32)).collect();
    trapezoid(u, &diff).powf(1.0 / p as f64)
}

/// Density distance over `u ∈ [q_lo, q_hi]` with `y = F_Y^{-1}(u)`.
pub fn lp_distance(a: &StationConditional, b: &StationConditional, y_marg: &Marginal, cfg: &SCConfig) -> Result<f64> {
    if a.grid != b.grid || a.density.len() != b.density.len() {
        return Err(Error::domain(format!("y grids differ for {} and {}", a.station_id, b.station_id)));
    }
    let u = linspace(cfg.y_quantiles.0, cfg.y_quantiles.1, cfg.lp_points);
    let ys: Vec<f64> = u.iter().map(|&q| y_marg.quantile(q)).collect();
    let fa: Vec<f64> = ys.iter().map(|&y| a.grid.interpolate(&a.density, y)).collect();
    let fb: Vec<f64> = ys.iter().map(|&y| b.grid.interpolate(&b.density, y)).collect();
    Ok(lp_distance_tabulated(&fa, &fb, &u, cfg.p_norm))
}

/// `asin(sqrt(hav))`: half the central angle between the two points.
pub fn haversine_term(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    haversine_a(p1, p2).sqrt().asin()
}

/// `d = ε + exp(-‖f_obs - f_un‖_p) · exp(-haversine term)`, in `[ε, ε + 1]`.
pub fn separation_degree(obs: &StationConditional, un: &StationConditional, y_marg: &Marginal, cfg: &SCConfig) -> Result<f64> {
    let lp = lp_distance(obs, un, y_marg, cfg)?;
    Ok(cfg.epsilon + (-lp).exp() * (-haversine_term(obs.coords, un.coords)).exp())
}
