use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::std_normal_cdf;

use super::dist::{phi, Marginal, MarginalModel};

/// Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub points: Vec<f64>,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    Auto,
    Fixed(f64),
}

impl Kde {
    pub fn new(mut points: Vec<f64>, bandwidth: f64) -> Result<Kde> {
        if points.is_empty() {
            return Err(Error::insufficient("KDE needs at least one point"));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::domain(format!("KDE bandwidth must be positive, got {bandwidth}")));
        }
        points.sort_by(f64::total_cmp);
        Ok(Kde { points, bandwidth })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        self.points.iter().map(|&p| phi((x - p) / h)).sum::<f64>() / (self.points.len() as f64 * h)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let s: f64 = self.points.iter().map(|&p| std_normal_cdf((x - p) / h)).sum();
        (s / self.points.len() as f64).clamp(0.0, 1.0)
    }

    /// Interval certain to contain every quantile in `[1e-16, 1 - 1e-16]`.
    pub(crate) fn bracket(&self) -> (f64, f64) {
        let lo = self.points[0] - 10.0 * self.bandwidth;
        let hi = self.points[self.points.len() - 1] + 10.0 * self.bandwidth;
        (lo, hi)
    }
}

/// Silverman's rule `0.9 min(sd, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::insufficient("bandwidth selection needs at least two samples"));
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if sd == 0.0 {
        return Err(Error::degenerate("zero-variance samples"));
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < n {
            s[i] * (1.0 - frac) + s[i + 1] * frac
        } else {
            s[n - 1]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Gaussian-kernel marginal built from the samples.
pub fn kde_distribution(samples: &[f64], bandwidth: Bandwidth) -> Result<MarginalModel> {
    if samples.len() < 2 {
        return Err(Error::insufficient("KDE needs at least two samples"));
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(samples)?,
        Bandwidth::Fixed(h) => {
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            if samples.iter().all(|&x| x == mean) {
                return Err(Error::degenerate("zero-variance samples"));
            }
            h
        }
    };
    let kde = Kde::new(samples.to_vec(), h)?;
    Ok(MarginalModel::evaluate(Marginal::Kde(kde), samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;

    #[test]
    fn two_point_kde_is_symmetric_about_midpoint() {
        let m = kde_distribution(&[0.0, 1.0], Bandwidth::Fixed(0.3)).unwrap();
        for &d in &[0.05, 0.3, 0.7, 2.0] {
            assert!((m.dist.pdf(0.5 - d) - m.dist.pdf(0.5 + d)).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_limits() {
        let m = kde_distribution(&[3.0, 4.0, 9.0], Bandwidth::Auto).unwrap();
        assert_eq!(m.dist.cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(m.dist.cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn density_integrates_to_one() {
        let xs = [1.2, 3.4, 3.5, 7.0, 7.7, 10.0];
        let m = kde_distribution(&xs, Bandwidth::Auto).unwrap();
        let mass = integrate(|x| m.dist.pdf(x), -50.0, 60.0, 1e-12, 1e-12);
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        assert!(matches!(kde_distribution(&[2.0, 2.0, 2.0], Bandwidth::Auto), Err(Error::Degenerate(_))));
        assert!(matches!(kde_distribution(&[2.0, 2.0], Bandwidth::Fixed(1.0)), Err(Error::Degenerate(_))));
    }
}
