use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::Marginal;
use crate::spatial::{haversine_m, VariogramModel};

use super::conditional::{separation_degree, SCConfig, StationConditional};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub station_id: String,
    pub alpha: f64,
    pub d: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub entries: Vec<WeightEntry>,
    /// Every `d · ρ` product was zero, so weights are uniform.
    pub fallback: bool,
}

impl WeightVector {
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.alpha).sum()
    }
}

/// Normalize `(station, d, ρ)` triples to `α ∝ d · ρ`.
pub fn normalize_weights(parts: Vec<(String, f64, f64)>) -> Result<WeightVector> {
    if parts.is_empty() {
        return Err(Error::insufficient("weights need at least one neighbor"));
    }
    if parts.iter().any(|p| !(p.1 > 0.0 && p.1.is_finite()) || !(0.0..=1.0).contains(&p.2)) {
        return Err(Error::domain("separation degrees must be positive and correlations in [0, 1]"));
    }
    let total: f64 = parts.iter().map(|p| p.1 * p.2).sum();
    let fallback = !(total > 0.0);
    let n = parts.len() as f64;
    let entries = parts
        .into_iter()
        .map(|(station_id, d, rho)| {
            let alpha = if fallback { 1.0 / n } else { d * rho / total };
            WeightEntry { station_id, alpha, d, rho }
        })
        .collect();
    Ok(WeightVector { entries, fallback })
}

/// Weights of `neighbors` for the unobserved location described by `un`,
/// with `ρ` the variogram ACF at the haversine lag.
pub fn weights(
    un: &StationConditional,
    neighbors: &[&StationConditional],
    variogram: &VariogramModel,
    y_marg: &Marginal,
    cfg: &SCConfig,
) -> Result<WeightVector> {
    let parts = neighbors
        .iter()
        .map(|s| {
            let d = separation_degree(s, un, y_marg, cfg)?;
            let rho = variogram.acf(haversine_m(s.coords, un.coords)).clamp(0.0, 1.0);
            Ok((s.station_id.clone(), d, rho))
        })
        .collect::<Result<Vec<_>>>()?;
    normalize_weights(parts)
}
