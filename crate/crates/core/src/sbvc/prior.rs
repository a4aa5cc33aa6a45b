use serde::{Deserialize, Serialize};

use crate::copulas::VineSpec;
use crate::error::{Error, Result};
use crate::special::std_normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
}

impl Prior {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Prior::Uniform { lo, hi } | Prior::TruncatedNormal { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!("prior bounds must be finite with lo < hi, got ({lo}, {hi})")));
        }
        if let Prior::TruncatedNormal { mean, sd, .. } = *self {
            if !(sd > 0.0 && mean.is_finite()) {
                return Err(Error::Config(format!("truncated normal needs sd > 0 and finite mean, got ({mean}, {sd})")));
            }
        }
        Ok(())
    }

    /// Normalized log density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if !(x >= lo && x <= hi) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Prior::Uniform { .. } => -(hi - lo).ln(),
            Prior::TruncatedNormal { mean, sd, .. } => {
                let z = (x - mean) / sd;
                let mass = std_normal_cdf((hi - mean) / sd) - std_normal_cdf((lo - mean) / sd);
                -0.5 * z * z - (sd * (2.0 * std::f64::consts::PI).sqrt()).ln() - mass.ln()
            }
        }
    }

    /// Standard deviation of a uniform over the prior box.
    pub fn range_sd(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo) / 12f64.sqrt()
    }
}

/// One prior per free vine parameter, in `VineSpec::param_vector` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub priors: Vec<Prior>,
}

impl PriorSpec {
    /// Uniform over each parameter's admissible box.
    pub fn uniform_for(vine: &VineSpec) -> PriorSpec {
        PriorSpec { priors: vine.param_bounds().into_iter().map(|(lo, hi)| Prior::Uniform { lo, hi }).collect() }
    }

    /// Checks arity and that every support sits inside the family domain.
    pub fn validate_for(&self, vine: &VineSpec) -> Result<()> {
        let b = vine.param_bounds();
        if b.len() != self.priors.len() {
            return Err(Error::Config(format!("vine has {} parameters but {} priors were given", b.len(), self.priors.len())));
        }
        for (p, (lo, hi)) in self.priors.iter().zip(b) {
            p.validate()?;
            let (a, c) = p.bounds();
            if a < lo || c > hi {
                return Err(Error::Config(format!("prior support ({a}, {c}) leaves the admissible box ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    pub fn ln_pdf(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.priors.len() {
            return f64::NEG_INFINITY;
        }
        self.priors.iter().zip(theta).map(|(p, &x)| p.ln_pdf(x)).sum()
    }
}

/// Unnormalized log posterior of vine parameters given copula-scale rows
/// (indexed by variable). Invalid parameters give `-inf`.
pub fn log_posterior(theta: &[f64], data: &[Vec<f64>], vine: &VineSpec, prior: &PriorSpec) -> f64 {
    let lp = prior.ln_pdf(theta);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    let Ok(v) = vine.with_params(theta) else {
        return f64::NEG_INFINITY;
    };
    let mut ll = 0.0;
    for row in data {
        match v.ln_density(row) {
            Ok(x) if x.is_finite() => ll += x,
            _ => return f64::NEG_INFINITY,
        }
    }
    ll + lp
}
