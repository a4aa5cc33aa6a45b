use serde::{Deserialize, Serialize};

use crate::copulas::{build_cvine, fit_pair_copula, CopulaFamily, PairFitOptions, VineSpec};
use crate::error::{Error, Result};
use crate::numeric::brent_minimize;

/// Lower bound on the bivariate coordinate density before the conditional
/// ratio is declared singular.
pub const MIN_COORD_DENSITY: f64 = 1e-12;

fn clamp(u: f64) -> f64 {
    u.clamp(1e-10, 1.0 - 1e-10)
}

/// `Σ (u_i^-θ - 1)` computed without cancellation for small `θ`.
fn clayton_excess(theta: f64, u: &[f64]) -> f64 {
    u.iter().map(|&x| (-theta * clamp(x).ln()).exp_m1()).sum()
}

/// Log density of the `d`-variate Clayton copula.
pub fn clayton_ln_density(theta: f64, u: &[f64]) -> f64 {
    let d = u.len() as f64;
    let lead: f64 = (0..u.len()).map(|k| (k as f64 * theta).ln_1p()).sum();
    let ln_u: f64 = u.iter().map(|&x| clamp(x).ln()).sum();
    lead - (1.0 + theta) * ln_u - (d + 1.0 / theta) * clayton_excess(theta, u).ln_1p()
}

/// Closed-form `P(U3 ≤ u3 | U1 = u1, U2 = u2)` of the trivariate Clayton copula.
pub fn clayton_conditional_cdf_closed(theta: f64, u1: f64, u2: f64, u3: f64) -> f64 {
    let s2 = clayton_excess(theta, &[u1, u2]).ln_1p();
    let s3 = clayton_excess(theta, &[u1, u2, u3]).ln_1p();
    ((-1.0 / theta - 2.0) * (s3 - s2)).exp()
}

/// Dependence between `(F(lon), F(lat), F(y))`. Variables are indexed
/// 0 = lon, 1 = lat, 2 = target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JointCopula {
    Clayton { theta: f64 },
    /// C-vine whose first two roots are the coordinates.
    CVine(VineSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Clayton,
    CVine,
}

impl std::str::FromStr for JointKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "clayton" => Ok(JointKind::Clayton),
            "cvine" | "vine" => Ok(JointKind::CVine),
            other => Err(Error::Config(format!("unknown joint copula `{other}`"))),
        }
    }
}

impl JointCopula {
    pub fn independence() -> JointCopula {
        JointCopula::CVine(VineSpec::independence(vec![0, 1, 2]).expect("valid order"))
    }

    pub fn clayton(theta: f64) -> Result<JointCopula> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::domain(format!("Clayton theta must be positive, got {theta}")));
        }
        Ok(JointCopula::Clayton { theta })
    }

    pub fn ln_density(&self, u: &[f64; 3]) -> f64 {
        match self {
            JointCopula::Clayton { theta } => clayton_ln_density(*theta, u),
            JointCopula::CVine(v) => v.ln_density(u).unwrap_or(f64::NEG_INFINITY),
        }
    }

    /// Density of the coordinate pair `(u1, u2)`.
    pub fn coord_density(&self, u1: f64, u2: f64) -> f64 {
        match self {
            JointCopula::Clayton { theta } => clayton_ln_density(*theta, &[u1, u2]).exp(),
            JointCopula::CVine(v) => v.edge(0, 1).copula.density(clamp(u1), clamp(u2)),
        }
    }

    /// `c3(u1, u2, u3) / c2(u1, u2)`.
    pub fn conditional_density(&self, u1: f64, u2: f64, u3: f64) -> Result<f64> {
        let c2 = self.coord_density(u1, u2);
        if !(c2 >= MIN_COORD_DENSITY) {
            return Err(Error::numerical(format!("coordinate copula density {c2:e} is near-singular at ({u1}, {u2})")));
        }
        match self {
            JointCopula::Clayton { theta } => {
                let t = *theta;
                let ln = (2.0 * t).ln_1p() - (1.0 + t) * clamp(u3).ln() - (3.0 + 1.0 / t) * clayton_excess(t, &[u1, u2, u3]).ln_1p()
                    + (2.0 + 1.0 / t) * clayton_excess(t, &[u1, u2]).ln_1p();
                Ok(ln.exp())
            }
            JointCopula::CVine(v) => v.conditional_density(2, u3, &[(0, u1), (1, u2)]),
        }
    }

    /// `P(U3 ≤ u3 | u1, u2)` from the closed form (Clayton) or nested h-functions.
    pub fn conditional_cdf(&self, u1: f64, u2: f64, u3: f64) -> Result<f64> {
        match self {
            JointCopula::Clayton { theta } => Ok(clayton_conditional_cdf_closed(*theta, u1, u2, u3)),
            JointCopula::CVine(v) => v.conditional_cdf(2, u3, &[(0, u1), (1, u2)]),
        }
    }

    pub fn loglik(&self, rows: &[[f64; 3]]) -> f64 {
        rows.iter().map(|r| self.ln_density(r)).sum()
    }

    pub fn n_params(&self) -> usize {
        match self {
            JointCopula::Clayton { .. } => 1,
            JointCopula::CVine(v) => v.param_vector().len(),
        }
    }
}

/// Maximum-likelihood Clayton fit on copula-scale rows.
pub fn fit_joint_clayton(rows: &[[f64; 3]]) -> Result<JointCopula> {
    if rows.len() < 3 {
        return Err(Error::insufficient("joint copula fit needs at least 3 records"));
    }
    let nll = |lt: f64| -> f64 {
        let v = -rows.iter().map(|r| clayton_ln_density(lt.exp(), r)).sum::<f64>();
        if v.is_finite() {
            v
        } else {
            f64::MAX
        }
    };
    let (lt, _) = brent_minimize(nll, 1e-4f64.ln(), 50f64.ln(), 1e-10, 200);
    JointCopula::clayton(lt.exp())
}

/// C-vine with root order (lon, lat, target); pair families chosen by AIC.
pub fn fit_joint_cvine(rows: &[[f64; 3]], families: &[CopulaFamily]) -> Result<JointCopula> {
    let data: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let opts = PairFitOptions::default();
    let v = build_cvine(&data, vec![0, 1, 2], |u, w| fit_pair_copula(u, w, families, &opts))?;
    Ok(JointCopula::CVine(v))
}

pub fn fit_joint(kind: JointKind, rows: &[[f64; 3]]) -> Result<JointCopula> {
    match kind {
        JointKind::Clayton => fit_joint_clayton(rows),
        JointKind::CVine => fit_joint_cvine(rows, &CopulaFamily::ALL),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bivariate_clayton_matches_pair_copula() {
        let pc = crate::copulas::PairCopula::new(CopulaFamily::Clayton, crate::copulas::Rotation::R0, vec![1.7]).unwrap();
        for &(u, v) in &[(0.2, 0.7), (0.5, 0.5), (0.9, 0.05)] {
            assert!((clayton_ln_density(1.7, &[u, v]) - pc.ln_density(u, v)).abs() < 1e-10);
        }
    }

    #[test]
    fn conditional_cdf_is_integral_of_conditional_density() {
        let j = JointCopula::clayton(1.3).unwrap();
        let (u1, u2) = (0.3, 0.8);
        let num = crate::numeric::integrate(|t| j.conditional_density(u1, u2, t).unwrap(), 0.0, 0.6, 1e-12, 1e-10);
        assert!((num - j.conditional_cdf(u1, u2, 0.6).unwrap()).abs() < 1e-7);
    }
}
