use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::numeric::{brent_root, integrate};
use crate::special::{bessel_ratio, ln_bessel_i0, std_normal_cdf, std_normal_pdf, std_normal_quantile};

use super::kde::Kde;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    LogNormal,
    Weibull,
    Gamma,
    Exponential,
    VonMises,
    Kde,
    Uniform,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "lognormal" | "ln" => Family::LogNormal,
            "weibull" => Family::Weibull,
            "gamma" => Family::Gamma,
            "exponential" | "exp" => Family::Exponential,
            "vonmises" | "vm" => Family::VonMises,
            "kde" => Family::Kde,
            "uniform" => Family::Uniform,
            other => return Err(Error::Config(format!("unknown marginal family `{other}`"))),
        })
    }
}

/// A parametrised univariate distribution.
///
/// `VonMises` lives on `[0, 2π)`; `Uniform` is used for coordinate margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Marginal {
    LogNormal { mu: f64, sigma: f64 },
    Weibull { shape: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    Exponential { rate: f64 },
    VonMises { mu: f64, kappa: f64 },
    Uniform { lo: f64, hi: f64 },
    Kde(Kde),
}

fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl Marginal {
    pub fn family(&self) -> Family {
        match self {
            Marginal::LogNormal { .. } => Family::LogNormal,
            Marginal::Weibull { .. } => Family::Weibull,
            Marginal::Gamma { .. } => Family::Gamma,
            Marginal::Exponential { .. } => Family::Exponential,
            Marginal::VonMises { .. } => Family::VonMises,
            Marginal::Uniform { .. } => Family::Uniform,
            Marginal::Kde(_) => Family::Kde,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Marginal::Exponential { .. } | Marginal::Kde(_) => 1,
            _ => 2,
        }
    }

    /// Named parameters in reporting order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Marginal::LogNormal { mu, sigma } => vec![("mu", mu), ("sigma", sigma)],
            Marginal::Weibull { shape, scale } => vec![("shape", shape), ("scale", scale)],
            Marginal::Gamma { shape, rate } => vec![("shape", shape), ("rate", rate)],
            Marginal::Exponential { rate } => vec![("rate", rate)],
            Marginal::VonMises { mu, kappa } => vec![("mu", mu), ("kappa", kappa)],
            Marginal::Uniform { lo, hi } => vec![("lo", lo), ("hi", hi)],
            Marginal::Kde(ref k) => vec![("bandwidth", k.bandwidth)],
        }
    }

    /// Closed support interval (may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Marginal::VonMises { .. } => (0.0, TAU),
            Marginal::Uniform { lo, hi } => (*lo, *hi),
            Marginal::Kde(_) => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (x.ln() - mu) / sigma;
                -x.ln() - sigma.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
            }
            Marginal::Weibull { shape, scale } => {
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let r = x / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * r.ln() - r.powf(shape)
            }
            Marginal::Gamma { shape, rate } => {
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Marginal::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Marginal::VonMises { mu, kappa } => {
                if !(0.0..TAU).contains(&x) {
                    return f64::NEG_INFINITY;
                }
                kappa * (x - mu).cos() - TAU.ln() - ln_bessel_i0(kappa)
            }
            Marginal::Uniform { lo, hi } => {
                if x < lo || x > hi {
                    f64::NEG_INFINITY
                } else {
                    -(hi - lo).ln()
                }
            }
            Marginal::Kde(ref k) => k.pdf(x).ln(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Kde(k) => k.pdf(x),
            _ => self.ln_pdf(x).exp(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - mu) / sigma)
                }
            }
            Marginal::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
            Marginal::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
            Marginal::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Marginal::VonMises { .. } => {
                if x <= 0.0 {
                    0.0
                } else if x >= TAU {
                    1.0
                } else {
                    integrate(|t| self.pdf(t), 0.0, x, 1e-13, 1e-12).clamp(0.0, 1.0)
                }
            }
            Marginal::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Kde(ref k) => k.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match *self {
            Marginal::LogNormal { mu, sigma } => (mu + sigma * std_normal_quantile(p)).exp(),
            Marginal::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            Marginal::Exponential { rate } => -(-p).ln_1p() / rate,
            Marginal::Uniform { lo, hi } => lo + p * (hi - lo),
            _ => {
                if p <= 0.0 {
                    return self.support().0;
                }
                if p >= 1.0 {
                    return self.support().1;
                }
                let (mut lo, mut hi) = match self {
                    Marginal::VonMises { .. } => (0.0, TAU),
                    Marginal::Kde(k) => k.bracket(),
                    _ => (0.0, self.mean().max(1e-300)),
                };
                if let Marginal::Gamma { .. } = self {
                    while self.cdf(hi) < p {
                        lo = hi;
                        hi *= 2.0;
                    }
                }
                brent_root(|x| self.cdf(x) - p, lo, hi, 1e-13 * hi.abs().max(1e-12), 300).unwrap_or(lo)
            }
        }
    }

    /// Expectation on the real line (for Von-Mises: the linear mean on `[0, 2π)`).
    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Marginal::Weibull { shape, scale } => scale * ln_gamma(1.0 + 1.0 / shape).exp(),
            Marginal::Gamma { shape, rate } => shape / rate,
            Marginal::Exponential { rate } => 1.0 / rate,
            Marginal::VonMises { .. } => integrate(|t| t * self.pdf(t), 0.0, TAU, 1e-12, 1e-12),
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::Kde(ref k) => k.points.iter().sum::<f64>() / k.points.len() as f64,
        }
    }

    /// Most likely value on a continuous support.
    pub fn mode(&self) -> f64 {
        match *self {
            Marginal::LogNormal { mu, sigma } => (mu - sigma * sigma).exp(),
            Marginal::VonMises { mu, .. } => wrap_angle(mu),
            _ => f64::NAN,
        }
    }

    pub fn loglik(&self, xs: &[f64]) -> f64 {
        xs.iter().map(|&x| self.ln_pdf(x)).sum()
    }
}

/// A fitted marginal with its goodness-of-fit summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub dist: Marginal,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Kolmogorov-Smirnov distance between the empirical and fitted CDF.
    pub ks: f64,
    pub n_obs: usize,
    /// Set when the fit hit a boundary (zero spread, diverging concentration).
    pub degenerate: bool,
    pub em_iterations: Option<usize>,
    pub converged: bool,
}

impl MarginalModel {
    /// Populate loglik/AIC/BIC/KS from the observed (non-missing) values.
    pub fn evaluate(dist: Marginal, observed: &[f64]) -> MarginalModel {
        let loglik = dist.loglik(observed);
        let n = observed.len();
        let k = dist.n_params() as f64;
        MarginalModel {
            aic: 2.0 * k - 2.0 * loglik,
            bic: k * (n as f64).ln() - 2.0 * loglik,
            ks: ks_statistic(&dist, observed),
            loglik,
            n_obs: n,
            dist,
            degenerate: false,
            em_iterations: None,
            converged: true,
        }
    }

    pub fn family(&self) -> Family {
        self.dist.family()
    }
}

/// Two-sided Kolmogorov-Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic(dist: &Marginal, xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Von-Mises mean resultant length; re-exported for callers inverting it.
pub fn vm_mean_resultant(kappa: f64) -> f64 {
    bessel_ratio(kappa)
}

/// Standard-normal density, handy for Gaussian kernels.
pub(crate) fn phi(z: f64) -> f64 {
    std_normal_pdf(z)
}
