//! Semivariograms: the classical binned estimator, parametric families and a
//! weighted least-squares fit.
//!
//! Lags and ranges are in meters. The Matérn correlation follows the common
//! geostatistics convention `ρ(h) = 2^{1-κ}/Γ(κ) (h/r)^κ K_κ(h/r)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::StationDataset;
use crate::error::{Error, Result};
use crate::numeric::{brent_minimize, nelder_mead};
use crate::special::bessel_k_scaled;

use super::geo::haversine_m;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariogramFamily {
    Exponential,
    Gaussian,
    Spherical,
    Matern,
}

impl VariogramFamily {
    pub const ALL: [VariogramFamily; 4] =
        [VariogramFamily::Exponential, VariogramFamily::Gaussian, VariogramFamily::Spherical, VariogramFamily::Matern];
}

impl std::str::FromStr for VariogramFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" => VariogramFamily::Exponential,
            "gaussian" | "gau" => VariogramFamily::Gaussian,
            "spherical" | "sph" => VariogramFamily::Spherical,
            "matern" | "mat" => VariogramFamily::Matern,
            other => return Err(Error::Config(format!("unknown variogram family `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub family: VariogramFamily,
    pub nugget: f64,
    pub sill: f64,
    /// Meters.
    pub range: f64,
    /// Matérn smoothness; ignored by the other families.
    pub kappa: f64,
}

impl VariogramModel {
    pub fn new(family: VariogramFamily, nugget: f64, sill: f64, range: f64, kappa: f64) -> Result<VariogramModel> {
        if !(nugget >= 0.0 && sill >= 0.0 && range > 0.0 && nugget.is_finite() && sill.is_finite() && range.is_finite())
        {
            return Err(Error::domain(format!("invalid variogram nugget={nugget} sill={sill} range={range}")));
        }
        if family == VariogramFamily::Matern && !(kappa > 0.0) {
            return Err(Error::domain("Matérn kappa must be positive"));
        }
        Ok(VariogramModel { family, nugget, sill, range, kappa })
    }

    /// Structural correlation (excluding the nugget) at lag `h ≥ 0`.
    pub fn structural_correlation(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 1.0;
        }
        let x = h / self.range;
        match self.family {
            VariogramFamily::Exponential => (-x).exp(),
            VariogramFamily::Gaussian => (-x * x).exp(),
            VariogramFamily::Spherical => {
                if x >= 1.0 {
                    0.0
                } else {
                    1.0 - 1.5 * x + 0.5 * x * x * x
                }
            }
            VariogramFamily::Matern => matern_correlation(x, self.kappa),
        }
    }

    /// `γ(h)`; by convention `γ(0) = nugget`.
    pub fn gamma(&self, h: f64) -> f64 {
        self.nugget + self.sill * (1.0 - self.structural_correlation(h.max(0.0)))
    }

    pub fn total_sill(&self) -> f64 {
        self.nugget + self.sill
    }

    /// Autocorrelation `1 - γ(h)/(nugget + sill)`, floored at zero.
    pub fn acf(&self, h: f64) -> f64 {
        let t = self.total_sill();
        if t <= 0.0 {
            return 0.0;
        }
        (1.0 - self.gamma(h) / t).max(0.0)
    }

    /// Covariance used to simulate a field: `sill·ρ(h)` plus the nugget at `h = 0`.
    pub fn covariance(&self, h: f64) -> f64 {
        if h <= 0.0 {
            self.total_sill()
        } else {
            self.sill * self.structural_correlation(h)
        }
    }
}

/// `2^{1-κ}/Γ(κ) x^κ K_κ(x)`.
pub fn matern_correlation(x: f64, kappa: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    // Half-integer orders have elementary forms.
    if kappa == 0.5 {
        return (-x).exp();
    }
    if kappa == 1.5 {
        return (1.0 + x) * (-x).exp();
    }
    if kappa == 2.5 {
        return (1.0 + x + x * x / 3.0) * (-x).exp();
    }
    let ln = (1.0 - kappa) * std::f64::consts::LN_2 - ln_gamma(kappa) + kappa * x.ln() + bessel_k_scaled(kappa, x).ln() - x;
    ln.exp().clamp(0.0, 1.0)
}

/// `ρ(h)` of a fitted model.
pub fn acf(model: &VariogramModel, h: f64) -> f64 {
    model.acf(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramBin {
    /// Mean pair distance in the bin, meters.
    pub lag: f64,
    pub gamma: f64,
    pub n_pairs: usize,
}

/// Matheron estimator over station pairs with co-observed values. `series[i]`
/// holds station `i`'s values on a shared time axis.
pub fn empirical_variogram_from(
    coords: &[(f64, f64)],
    series: &[Vec<Option<f64>>],
    n_bins: usize,
    max_lag: Option<f64>,
) -> Result<Vec<VariogramBin>> {
    if coords.len() != series.len() {
        return Err(Error::domain("coordinates and series differ in length"));
    }
    if coords.len() < 2 {
        return Err(Error::insufficient("variogram needs at least two stations"));
    }
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be positive".into()));
    }
    let mut pairs = Vec::new();
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            let d = haversine_m(coords[i], coords[j]);
            let (mut s, mut n) = (0.0, 0usize);
            for (a, b) in series[i].iter().zip(&series[j]) {
                if let (Some(a), Some(b)) = (a, b) {
                    s += (a - b) * (a - b);
                    n += 1;
                }
            }
            if n > 0 {
                pairs.push((d, s, n));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::insufficient("no station pair has co-observed values"));
    }
    let cutoff = max_lag.unwrap_or_else(|| pairs.iter().map(|p| p.0).fold(0.0, f64::max));
    let width = if cutoff > 0.0 { cutoff / n_bins as f64 } else { 1.0 };
    let mut acc: BTreeMap<usize, (f64, f64, usize, usize)> = BTreeMap::new();
    for (d, s, n) in pairs {
        if d > cutoff * (1.0 + 1e-12) {
            continue;
        }
        let b = ((d / width) as usize).min(n_bins - 1);
        let e = acc.entry(b).or_insert((0.0, 0.0, 0, 0));
        e.0 += d * n as f64;
        e.1 += s;
        e.2 += n;
        e.3 += 1;
    }
    Ok(acc
        .into_values()
        .map(|(dsum, s, n, _)| VariogramBin { lag: dsum / n as f64, gamma: s / (2.0 * n as f64), n_pairs: n })
        .collect())
}

/// Binned variogram of one dataset variable, pairing values by date.
pub fn empirical_variogram(ds: &StationDataset, variable: &str, n_bins: usize) -> Result<Vec<VariogramBin>> {
    let var = ds.variable_index(variable)?;
    let dates = ds.dates();
    let pos: BTreeMap<_, _> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let coords: Vec<(f64, f64)> = ds.stations.iter().map(|s| s.coords()).collect();
    let series: Vec<Vec<Option<f64>>> = ds
        .stations
        .iter()
        .map(|s| {
            let mut row = vec![None; dates.len()];
            for o in ds.series.get(&s.station_id).map(Vec::as_slice).unwrap_or(&[]) {
                row[pos[&o.date]] = o.values[var];
            }
            row
        })
        .collect();
    empirical_variogram_from(&coords, &series, n_bins, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub model: VariogramModel,
    /// Weighted sum of squared errors of the chosen model.
    pub wsse: f64,
    /// Flat cloud: the fit collapsed to a pure nugget.
    pub degenerate: bool,
    pub warnings: Vec<String>,
    /// Weighted SSE of every family tried.
    pub candidates: Vec<(VariogramFamily, f64)>,
}

/// Weighted least squares for `(nugget, sill)` given fixed correlations,
/// constrained to be nonnegative.
fn linear_part(bins: &[VariogramBin], rho: &[f64]) -> (f64, f64, f64) {
    let w: Vec<f64> = bins.iter().map(|b| b.n_pairs as f64).collect();
    let sse = |n: f64, s: f64| -> f64 {
        bins.iter().zip(rho).zip(&w).map(|((b, r), w)| w * (b.gamma - n - s * (1.0 - r)).powi(2)).sum()
    };
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((b, r), w) in bins.iter().zip(rho).zip(&w) {
        let x = 1.0 - r;
        sw += w;
        sx += w * x;
        sy += w * b.gamma;
        sxx += w * x * x;
        sxy += w * x * b.gamma;
    }
    let det = sw * sxx - sx * sx;
    let mut cands = vec![(sy / sw, 0.0)];
    if sxx > 0.0 {
        cands.push((0.0, (sxy / sxx).max(0.0)));
    }
    if det.abs() > 1e-12 * sw * sxx.max(1e-300) {
        let s = (sw * sxy - sx * sy) / det;
        let n = (sy - s * sx) / sw;
        if n >= 0.0 && s >= 0.0 {
            cands.push((n, s));
        }
    }
    cands
        .into_iter()
        .map(|(n, s)| (n.max(0.0), s.max(0.0), sse(n.max(0.0), s.max(0.0))))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap()
}

fn fit_family(bins: &[VariogramBin], family: VariogramFamily) -> Result<(VariogramModel, f64, Option<String>)> {
    let max_lag = bins.iter().map(|b| b.lag).fold(0.0, f64::max);
    let min_lag = bins.iter().map(|b| b.lag).filter(|&l| l > 0.0).fold(f64::INFINITY, f64::min);
    let min_lag = if min_lag.is_finite() { min_lag } else { max_lag.max(1.0) };
    let (r_lo, r_hi) = ((min_lag / 20.0).max(1e-6), (max_lag * 5.0).max(1.0));
    let eval = |range: f64, kappa: f64| -> (f64, f64, f64) {
        let m = VariogramModel { family, nugget: 0.0, sill: 1.0, range, kappa };
        let rho: Vec<f64> = bins.iter().map(|b| m.structural_correlation(b.lag)).collect();
        linear_part(bins, &rho)
    };
    let kappas: Vec<f64> = if family == VariogramFamily::Matern {
        (0..=16).map(|i| 0.05 * (100.0f64).powf(i as f64 / 16.0)).collect()
    } else {
        vec![0.5]
    };
    let ranges: Vec<f64> = (0..=60).map(|i| r_lo * (r_hi / r_lo).powf(i as f64 / 60.0)).collect();
    let mut best = (f64::INFINITY, r_lo, 0.5);
    for &k in &kappas {
        for &r in &ranges {
            let sse = eval(r, k).2;
            if sse < best.0 {
                best = (sse, r, k);
            }
        }
    }
    let (grid_sse, mut range, mut kappa) = best;
    let mut warning = None;
    if family == VariogramFamily::Matern {
        let f = |p: &[f64]| {
            let (r, k) = (p[0].exp(), p[1].exp());
            if !(r_lo..=r_hi).contains(&r) || !(0.01..=10.0).contains(&k) {
                return f64::INFINITY;
            }
            eval(r, k).2
        };
        let (p, v) = nelder_mead(f, &[range.ln(), kappa.ln()], &[0.1, 0.1], 1e-12, 500);
        if v.is_finite() && v <= grid_sse {
            range = p[0].exp();
            kappa = p[1].exp();
        } else {
            warning = Some("Matérn polish diverged; kept best grid point".to_string());
        }
    } else {
        let i = ranges.iter().position(|&r| r == range).unwrap_or(0);
        let a = ranges[i.saturating_sub(1)].ln();
        let b = ranges[(i + 1).min(ranges.len() - 1)].ln();
        let (x, v) = brent_minimize(|lr| eval(lr.exp(), kappa).2, a, b, 1e-10, 200);
        if v <= grid_sse {
            range = x.exp();
        }
    }
    let (nugget, sill, sse) = eval(range, kappa);
    Ok((VariogramModel { family, nugget, sill, range, kappa }, sse, warning))
}

/// Weighted least-squares fit (weights = pair counts) of each candidate
/// family; the smallest weighted SSE wins.
pub fn fit_variogram(bins: &[VariogramBin], families: &[VariogramFamily]) -> Result<VariogramFit> {
    let usable: Vec<VariogramBin> = bins.iter().filter(|b| b.n_pairs > 0).cloned().collect();
    if usable.len() < 4 {
        return Err(Error::insufficient(format!("variogram fit needs at least 4 bins with pairs, got {}", usable.len())));
    }
    if families.is_empty() {
        return Err(Error::Config("no variogram families given".into()));
    }
    let mean_gamma = usable.iter().map(|b| b.gamma).sum::<f64>() / usable.len() as f64;
    let spread = usable.iter().map(|b| (b.gamma - mean_gamma).abs()).fold(0.0, f64::max);
    let max_lag = usable.iter().map(|b| b.lag).fold(0.0, f64::max);
    if spread <= 1e-12 * mean_gamma.abs().max(1e-300) || spread == 0.0 {
        let model = VariogramModel { family: families[0], nugget: mean_gamma.max(0.0), sill: 0.0, range: max_lag.max(1.0), kappa: 0.5 };
        return Ok(VariogramFit {
            model,
            wsse: 0.0,
            degenerate: true,
            warnings: vec!["flat variogram cloud: pure-nugget model".into()],
            candidates: vec![],
        });
    }
    let mut warnings = Vec::new();
    let mut cands = Vec::new();
    let mut best: Option<(VariogramModel, f64)> = None;
    for &f in families {
        let (m, sse, w) = fit_family(&usable, f)?;
        if let Some(w) = w {
            warnings.push(w);
        }
        cands.push((f, sse));
        if best.as_ref().is_none_or(|b| sse < b.1) {
            best = Some((m, sse));
        }
    }
    let (model, wsse) = best.unwrap();
    let degenerate = model.sill <= 1e-12 * model.nugget.max(1e-300);
    if degenerate {
        warnings.push("fitted structural sill is zero: pure-nugget model".into());
    }
    Ok(VariogramFit { model, wsse, degenerate, warnings, candidates: cands })
}
