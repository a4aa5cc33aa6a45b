use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::family::PairCopula;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDependence {
    pub lambda_upper: f64,
    pub lambda_lower: f64,
    /// `(q, estimate)`: `P(V ≤ q | U ≤ q)` for `q ≤ 0.5`, `P(V > q | U > q)` above.
    pub empirical_curve: Vec<(f64, f64)>,
}

pub fn default_tail_grid() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.98, 0.99]
}

/// Closed-form coefficients plus the model's own finite-`q` curve.
pub fn tail_dependence(c: &PairCopula) -> TailDependence {
    let (lambda_lower, lambda_upper) = c.tail_coefficients();
    let empirical_curve = default_tail_grid()
        .into_iter()
        .map(|q| {
            let cqq = c.cdf(q, q);
            let est = if q <= 0.5 { cqq / q } else { (1.0 - 2.0 * q + cqq) / (1.0 - q) };
            (q, est.clamp(0.0, 1.0))
        })
        .collect();
    TailDependence { lambda_upper, lambda_lower, empirical_curve }
}

/// Conditional-exceedance estimator on a grid of thresholds; the lambdas are
/// read off at the most extreme grid points on each side.
pub fn empirical_tail_dependence(u: &[f64], v: &[f64], grid: &[f64]) -> Result<TailDependence> {
    if u.len() != v.len() {
        return Err(Error::domain("length mismatch"));
    }
    if u.len() < 200 {
        return Err(Error::insufficient(format!("empirical tails need at least 200 pairs, got {}", u.len())));
    }
    let mut curve = Vec::with_capacity(grid.len());
    for &q in grid {
        let (mut hit, mut base) = (0usize, 0usize);
        for (&a, &b) in u.iter().zip(v) {
            if q <= 0.5 {
                if a <= q {
                    base += 1;
                    hit += (b <= q) as usize;
                }
            } else if a > q {
                base += 1;
                hit += (b > q) as usize;
            }
        }
        if base == 0 {
            return Err(Error::insufficient(format!("no exceedances at threshold {q}")));
        }
        curve.push((q, hit as f64 / base as f64));
    }
    let lower = curve.iter().filter(|p| p.0 <= 0.5).min_by(|a, b| a.0.total_cmp(&b.0)).map_or(0.0, |p| p.1);
    let upper = curve.iter().filter(|p| p.0 > 0.5).max_by(|a, b| a.0.total_cmp(&b.0)).map_or(0.0, |p| p.1);
    Ok(TailDependence { lambda_upper: upper, lambda_lower: lower, empirical_curve: curve })
}
