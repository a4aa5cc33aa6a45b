use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{brent_minimize, nelder_mead};

use super::family::{CopulaFamily, PairCopula, Rotation};
use super::kendall::{independence_pvalue, kendall_tau};

/// A fitted pair copula with its goodness-of-fit summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPair {
    pub copula: PairCopula,
    /// Model-implied Kendall's tau.
    pub tau: f64,
    pub empirical_tau: f64,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
}

impl FittedPair {
    fn new(copula: PairCopula, loglik: f64, empirical_tau: f64, n: usize) -> FittedPair {
        let k = copula.n_params() as f64;
        FittedPair {
            tau: copula.kendall_tau(),
            aic: 2.0 * k - 2.0 * loglik,
            bic: k * (n as f64).ln() - 2.0 * loglik,
            copula,
            empirical_tau,
            loglik,
            n_obs: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFitOptions {
    /// Accept independence outright when the tau test p-value exceeds this.
    pub independence_level: Option<f64>,
    /// Expand rotatable families over the rotations matching the tau sign.
    pub rotations: bool,
}

impl Default for PairFitOptions {
    fn default() -> Self {
        PairFitOptions { independence_level: Some(0.05), rotations: true }
    }
}

/// Ranks scaled to `rank / (n + 1)`; ties get their average rank.
pub fn pseudo_observations(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank / (n as f64 + 1.0);
        }
        i = j + 1;
    }
    out
}

fn candidates(families: &[CopulaFamily], tau: f64, rotations: bool) -> (Vec<(CopulaFamily, Rotation)>, Vec<String>) {
    let mut keep = Vec::new();
    let mut rejected = Vec::new();
    for &f in families {
        if f.rotatable() {
            let rots: &[Rotation] = if !rotations {
                &[Rotation::R0]
            } else if tau >= 0.0 {
                &[Rotation::R0, Rotation::R180]
            } else {
                &[Rotation::R90, Rotation::R270]
            };
            for &r in rots {
                if r.negates() == (tau < 0.0) {
                    keep.push((f, r));
                } else {
                    rejected.push(format!("{f:?} rot {} (tau sign {tau:+.4})", r.degrees()));
                }
            }
        } else {
            keep.push((f, Rotation::R0));
        }
    }
    (keep, rejected)
}

fn one_param_range(f: CopulaFamily, tau: f64) -> (f64, f64) {
    let (lo, hi) = f.bounds()[0];
    match f {
        CopulaFamily::Frank if tau >= 0.0 => (1e-3, hi),
        CopulaFamily::Frank => (lo, -1e-3),
        _ => (lo, hi),
    }
}

fn grid_1d(lo: f64, hi: f64, f: CopulaFamily) -> Vec<f64> {
    if f == CopulaFamily::Gaussian || (lo < 0.0 && hi > 0.0) {
        return (0..=24).map(|i| lo + (hi - lo) * i as f64 / 24.0).collect();
    }
    // geometric spacing away from the boundary nearest independence
    let near_indep_at_lo = hi > 0.0;
    let (a, b) = if near_indep_at_lo { (lo, hi) } else { (hi, lo) };
    let span = (b - a).abs();
    (0..=24)
        .map(|i| {
            let g = 1e-4f64.powf(1.0 - i as f64 / 24.0);
            a + (b - a).signum() * span * g
        })
        .map(|x| x.clamp(lo, hi))
        .collect()
}

/// Maximum-likelihood fit of one family/rotation.
pub fn fit_family(u: &[f64], v: &[f64], family: CopulaFamily, rotation: Rotation) -> Result<FittedPair> {
    let tau = kendall_tau(u, v)?;
    fit_family_with_tau(u, v, family, rotation, tau)
}

fn fit_family_with_tau(u: &[f64], v: &[f64], family: CopulaFamily, rotation: Rotation, tau: f64) -> Result<FittedPair> {
    let n = u.len();
    let nll = |p: &[f64]| -> f64 {
        match PairCopula::new(family, rotation, p.to_vec()) {
            Ok(c) => {
                let ll = c.loglik(u, v);
                if ll.is_finite() {
                    -ll
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    };
    let params = match family.n_params() {
        0 => vec![],
        1 => {
            let (lo, hi) = one_param_range(family, if rotation.negates() { -tau } else { tau });
            let mut grid = grid_1d(lo, hi, family);
            if let Some(t0) = tau_inversion(family, tau.abs()) {
                grid.push(t0.clamp(lo, hi));
                grid.sort_by(f64::total_cmp);
            }
            let vals: Vec<f64> = grid.iter().map(|&t| nll(&[t])).collect();
            let best = (0..grid.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
            let a = grid[best.saturating_sub(1)];
            let b = grid[(best + 1).min(grid.len() - 1)];
            let (x, fx) = brent_minimize(|t| nll(&[t]), a, b, 1e-10, 200);
            vec![if fx <= vals[best] { x } else { grid[best] }]
        }
        _ => {
            let starts: Vec<Vec<f64>> = match family {
                CopulaFamily::StudentT => {
                    let r0 = (std::f64::consts::FRAC_PI_2 * tau).sin().clamp(-0.95, 0.95);
                    [2.5, 4.0, 6.0, 10.0, 20.0, 40.0].iter().map(|&nu| vec![r0, nu]).collect()
                }
                _ => {
                    let mut s = Vec::new();
                    for &t in &[1.1, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0] {
                        for &d in &[0.05, 0.2, 0.4, 0.6, 0.8, 0.95] {
                            s.push(vec![t, d]);
                        }
                    }
                    s
                }
            };
            let best = starts
                .into_iter()
                .map(|p| {
                    let f = nll(&p);
                    (p, f)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let step: Vec<f64> = best.0.iter().map(|x| 0.1 * x.abs().max(0.1)).collect();
            let (p, f) = nelder_mead(nll, &best.0, &step, 1e-10, 2000);
            if f <= best.1 {
                p
            } else {
                best.0
            }
        }
    };
    let copula = PairCopula::new(family, rotation, params)?;
    let ll = copula.loglik(u, v);
    if !ll.is_finite() {
        return Err(Error::numerical(format!("{copula}: non-finite log-likelihood")));
    }
    Ok(FittedPair::new(copula, ll, tau, n))
}

/// Closed-form `θ(τ)` where it exists (for `τ ≥ 0`).
fn tau_inversion(family: CopulaFamily, tau: f64) -> Option<f64> {
    let tau = tau.min(0.98);
    match family {
        CopulaFamily::Gaussian | CopulaFamily::StudentT => Some((std::f64::consts::FRAC_PI_2 * tau).sin()),
        CopulaFamily::Clayton => Some(2.0 * tau / (1.0 - tau)),
        CopulaFamily::Gumbel => Some(1.0 / (1.0 - tau)),
        _ => None,
    }
}

fn check_pseudo(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::domain(format!("length mismatch: {} vs {}", u.len(), v.len())));
    }
    if u.len() < 10 {
        return Err(Error::insufficient(format!("pair-copula fit needs at least 10 pairs, got {}", u.len())));
    }
    if let Some(x) = u.iter().chain(v).find(|x| !(**x > 0.0 && **x < 1.0)) {
        return Err(Error::domain(format!("pseudo-observation {x} outside (0, 1)")));
    }
    Ok(())
}

/// Fit all admissible candidates; successes ranked by AIC (ties: loglik).
pub fn fit_all_candidates(
    u: &[f64],
    v: &[f64],
    families: &[CopulaFamily],
    opts: &PairFitOptions,
) -> Result<Vec<FittedPair>> {
    check_pseudo(u, v)?;
    let tau = kendall_tau(u, v)?;
    let n = u.len();
    if families.contains(&CopulaFamily::Independence) {
        if let Some(level) = opts.independence_level {
            if independence_pvalue(tau, n) > level {
                return Ok(vec![FittedPair::new(PairCopula::independence(), 0.0, tau, n)]);
            }
        }
    }
    let (cands, mut rejected) = candidates(families, tau, opts.rotations);
    let fits: Vec<(String, Result<FittedPair>)> = cands
        .par_iter()
        .map(|&(f, r)| (format!("{f:?} rot {}", r.degrees()), fit_family_with_tau(u, v, f, r, tau)))
        .collect();
    let mut ok = Vec::new();
    for (name, r) in fits {
        match r {
            Ok(fp) => ok.push(fp),
            Err(e) => rejected.push(format!("{name}: {e}")),
        }
    }
    if ok.is_empty() {
        return Err(Error::AllFailed(rejected));
    }
    ok.sort_by(|a, b| a.aic.total_cmp(&b.aic).then(b.loglik.total_cmp(&a.loglik)));
    Ok(ok)
}

/// Fit and select a pair copula by AIC.
pub fn fit_pair_copula(u: &[f64], v: &[f64], families: &[CopulaFamily], opts: &PairFitOptions) -> Result<FittedPair> {
    Ok(fit_all_candidates(u, v, families, opts)?.remove(0))
}
