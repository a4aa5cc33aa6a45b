use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{haversine_m, VariogramModel};

/// Diagonal jitter added when the kriging matrix is singular.
pub const KRIGING_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingResult {
    pub value: f64,
    pub variance: f64,
    pub weights: Vec<f64>,
    pub lagrange: f64,
    pub jittered: bool,
}

/// Factored ordinary-kriging system for a fixed station set, in covariance
/// form: `Σ_j λ_j C_ij + μ = C_i0`, `Σ λ_j = 1`.
#[derive(Debug, Clone)]
pub struct KrigingSystem {
    coords: Vec<(f64, f64)>,
    values: Vec<f64>,
    model: VariogramModel,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub jittered: bool,
}

fn ok_matrix(coords: &[(f64, f64)], model: &VariogramModel, jitter: f64) -> DMatrix<f64> {
    let n = coords.len();
    DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i == n || j == n {
            if i == n && j == n {
                0.0
            } else {
                1.0
            }
        } else if i == j {
            model.covariance(0.0) + jitter
        } else {
            model.covariance(haversine_m(coords[i], coords[j]))
        }
    })
}

fn solves(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let b = DVector::from_fn(n, |i, _| if i + 1 == n { 1.0 } else { 0.0 });
    match lu.solve(&b) {
        Some(x) => {
            let r = (a * &x - &b).norm();
            x.iter().all(|v| v.is_finite()) && r < 1e-8 * (1.0 + a.norm() * x.norm())
        }
        None => false,
    }
}

impl KrigingSystem {
    pub fn new(stations: &[((f64, f64), f64)], model: &VariogramModel) -> Result<KrigingSystem> {
        if stations.len() < 2 {
            return Err(Error::insufficient("ordinary kriging needs at least two stations"));
        }
        if stations.iter().any(|s| !s.1.is_finite()) {
            return Err(Error::domain("station values must be finite"));
        }
        let coords: Vec<(f64, f64)> = stations.iter().map(|s| s.0).collect();
        let values: Vec<f64> = stations.iter().map(|s| s.1).collect();
        let scale = model.total_sill().max(f64::MIN_POSITIVE);
        for (jitter, jittered) in [(0.0, false), (KRIGING_JITTER * scale.max(1.0), true)] {
            let a = ok_matrix(&coords, model, jitter);
            let lu = a.clone().lu();
            if solves(&lu, &a) {
                return Ok(KrigingSystem { coords, values, model: model.clone(), lu, jittered });
            }
        }
        Err(Error::numerical("kriging matrix is singular even after jitter"))
    }

    pub fn predict(&self, point: (f64, f64)) -> Result<KrigingResult> {
        let n = self.coords.len();
        let c0: Vec<f64> = self.coords.iter().map(|&c| self.model.covariance(haversine_m(c, point))).collect();
        let b = DVector::from_fn(n + 1, |i, _| if i == n { 1.0 } else { c0[i] });
        let x = self.lu.solve(&b).ok_or_else(|| Error::numerical("kriging solve failed"))?;
        let weights: Vec<f64> = x.iter().take(n).copied().collect();
        let lagrange = x[n];
        let value = weights.iter().zip(&self.values).map(|(w, v)| w * v).sum();
        let variance = (self.model.covariance(0.0) - weights.iter().zip(&c0).map(|(w, c)| w * c).sum::<f64>() - lagrange).max(0.0);
        Ok(KrigingResult { value, variance, weights, lagrange, jittered: self.jittered })
    }
}

/// Ordinary kriging at one point. At a station site the station's own value
/// is returned (the covariance form is an exact interpolator).
pub fn ordinary_kriging(point: (f64, f64), stations: &[((f64, f64), f64)], model: &VariogramModel) -> Result<KrigingResult> {
    KrigingSystem::new(stations, model)?.predict(point)
}

/// Distance below which a query point counts as a station site (meters).
pub const COINCIDENT_M: f64 = 1e-6;

/// Inverse distance weighting with weights `d^-power` on haversine distance.
pub fn idw(point: (f64, f64), stations: &[((f64, f64), f64)], power: f64) -> Result<f64> {
    if stations.is_empty() {
        return Err(Error::insufficient("IDW needs at least one station"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(c, v) in stations {
        let d = haversine_m(point, c);
        if d < COINCIDENT_M {
            return Ok(v);
        }
        let w = d.powf(-power);
        num += w * v;
        den += w;
    }
    Ok(num / den)
}
