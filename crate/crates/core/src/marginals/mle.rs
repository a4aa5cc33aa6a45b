use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::numeric::brent_root;

use super::dist::{Family, Marginal, MarginalModel};
use super::em::lognormal_mle;
use super::kde::{kde_distribution, Bandwidth};
use super::vonmises::{fit_vonmises_umvue, invert_mean_resultant};

fn require_positive(family: Family, xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::insufficient(format!("{family:?} fit needs at least 2 samples, got {}", xs.len())));
    }
    if let Some(x) = xs.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::domain(format!("{family:?} needs positive samples, found {x}")));
    }
    Ok(())
}

/// Find `k` with `g(k) = 0` for a decreasing `g`, growing the bracket geometrically.
fn decreasing_root(g: impl Fn(f64) -> f64, start: f64) -> Result<f64> {
    let (mut lo, mut hi) = (start, start);
    while g(lo) < 0.0 {
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(Error::numerical("shape root below 1e-12"));
        }
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::degenerate("shape estimate diverges (near-constant sample)"));
        }
    }
    brent_root(g, lo, hi, 1e-12, 500)
}

fn weibull_mle(xs: &[f64]) -> Result<(f64, f64)> {
    let max = xs.iter().copied().fold(f64::MIN, f64::max);
    let ls: Vec<f64> = xs.iter().map(|x| (x / max).ln()).collect();
    let mean_l = ls.iter().sum::<f64>() / ls.len() as f64;
    if ls.iter().all(|&l| (l - mean_l).abs() < 1e-14) {
        return Err(Error::degenerate("Weibull fit on a constant sample"));
    }
    // profile score in the shape with the scale profiled out
    let g = |k: f64| {
        let (mut s0, mut s1) = (0.0, 0.0);
        for &l in &ls {
            let w = (k * l).exp();
            s0 += w;
            s1 += w * l;
        }
        1.0 / k + mean_l - s1 / s0
    };
    let k = decreasing_root(g, 1.0)?;
    let mean_pow = ls.iter().map(|l| (k * l).exp()).sum::<f64>() / ls.len() as f64;
    Ok((k, max * mean_pow.powf(1.0 / k)))
}

fn gamma_mle(xs: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let s = mean.ln() - xs.iter().map(|x| x.ln()).sum::<f64>() / n;
    if s <= 1e-14 {
        return Err(Error::degenerate("Gamma fit on a constant sample"));
    }
    let start = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    let k = decreasing_root(|k| k.ln() - digamma(k) - s, start)?;
    Ok((k, k / mean))
}

/// Maximum-likelihood fit of a single family on non-missing samples.
///
/// `LogNormal`, `Exponential` and `Uniform` are closed form; `Weibull` and
/// `Gamma` solve their profile score equations; `VonMises` inverts the mean
/// resultant length; `Kde` uses the automatic bandwidth.
pub fn fit_family_mle(family: Family, xs: &[f64]) -> Result<MarginalModel> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("non-finite sample"));
    }
    let dist = match family {
        Family::LogNormal => {
            let (mu, sigma) = lognormal_mle(xs)?;
            if sigma <= 0.0 {
                return Err(Error::degenerate("log-normal fit on a constant sample"));
            }
            Marginal::LogNormal { mu, sigma }
        }
        Family::Exponential => {
            require_positive(family, xs)?;
            Marginal::Exponential { rate: xs.len() as f64 / xs.iter().sum::<f64>() }
        }
        Family::Weibull => {
            require_positive(family, xs)?;
            let (shape, scale) = weibull_mle(xs)?;
            Marginal::Weibull { shape, scale }
        }
        Family::Gamma => {
            require_positive(family, xs)?;
            let (shape, rate) = gamma_mle(xs)?;
            Marginal::Gamma { shape, rate }
        }
        Family::VonMises => {
            let fit = fit_vonmises_umvue(xs, 1.0)?;
            if fit.degenerate {
                return Err(Error::degenerate("Von-Mises concentration diverges"));
            }
            let n = xs.len() as f64;
            let c = xs.iter().map(|x| x.cos()).sum::<f64>() / n;
            let s = xs.iter().map(|x| x.sin()).sum::<f64>() / n;
            let kappa = invert_mean_resultant((c * c + s * s).sqrt())?;
            Marginal::VonMises { mu: fit.mu_hat, kappa }
        }
        Family::Uniform => {
            if xs.len() < 2 {
                return Err(Error::insufficient("Uniform fit needs at least 2 samples"));
            }
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi <= lo {
                return Err(Error::degenerate("Uniform fit on a constant sample"));
            }
            Marginal::Uniform { lo, hi }
        }
        Family::Kde => return kde_distribution(xs, Bandwidth::Auto),
    };
    Ok(MarginalModel::evaluate(dist, xs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_on_ones() {
        let m = fit_family_mle(Family::Exponential, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.dist, Marginal::Exponential { rate: 1.0 });
        assert_eq!(m.dist.mean(), 1.0);
    }

    #[test]
    fn weibull_score_vanishes() {
        let xs = [0.3, 1.2, 2.5, 0.9, 4.1, 1.7, 0.6];
        let m = fit_family_mle(Family::Weibull, &xs).unwrap();
        let Marginal::Weibull { shape, scale } = m.dist else { unreachable!() };
        let h = 1e-5;
        let ll = |k: f64, l: f64| Marginal::Weibull { shape: k, scale: l }.loglik(&xs);
        assert!((ll(shape + h, scale) - ll(shape - h, scale)).abs() / (2.0 * h) < 1e-4);
        assert!((ll(shape, scale + h) - ll(shape, scale - h)).abs() / (2.0 * h) < 1e-4);
    }

    #[test]
    fn gamma_score_vanishes() {
        let xs = [0.3, 1.2, 2.5, 0.9, 4.1, 1.7, 0.6];
        let m = fit_family_mle(Family::Gamma, &xs).unwrap();
        let Marginal::Gamma { shape, rate } = m.dist else { unreachable!() };
        let h = 1e-5;
        let ll = |k: f64, r: f64| Marginal::Gamma { shape: k, rate: r }.loglik(&xs);
        assert!((ll(shape + h, rate) - ll(shape - h, rate)).abs() / (2.0 * h) < 1e-4);
        assert!((ll(shape, rate + h) - ll(shape, rate - h)).abs() / (2.0 * h) < 1e-4);
    }

    #[test]
    fn negative_values_rejected() {
        for f in [Family::Exponential, Family::Weibull, Family::Gamma, Family::LogNormal] {
            assert!(matches!(fit_family_mle(f, &[1.0, -2.0, 3.0]), Err(Error::Domain(_))), "{f:?}");
        }
    }
}
