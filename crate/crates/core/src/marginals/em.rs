//! EM estimation of log-normal parameters when some cells are missing.
//!
//! With `w_1..w_{n1}` observed and `w_{n1+1}..w_{n2}` missing, the E-step
//! replaces the complete-data sufficient statistics of the missing cells,
//! `log w` and `(log w)^2`, by their expectations under the current
//! `(mu, sigma)`; the M-step maximises the resulting Q-function in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dist::{Marginal, MarginalModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Stop once the observed-data loglik changes by less than this...
    pub tol: f64,
    /// ...and no parameter moves by more than this.
    pub param_tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { tol: 1e-8, param_tol: 1e-10, max_iter: 10_000 }
    }
}

/// One EM iterate. `params` is `(mu, sigma)` or `(mu, kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmState {
    pub iteration: usize,
    pub params: [f64; 2],
    /// Q((params) | previous params); NaN for the starting point.
    pub q_value: f64,
    pub loglik_observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub model: MarginalModel,
    pub trace: Vec<EmState>,
    pub converged: bool,
    pub iterations: usize,
}

pub(crate) fn split_observed(samples: &[Option<f64>]) -> (Vec<f64>, usize) {
    let observed: Vec<f64> = samples.iter().flatten().copied().collect();
    let missing = samples.len() - observed.len();
    (observed, missing)
}

fn ln_observed_loglik(sum_l: f64, sum_l2: f64, n1: f64, mu: f64, sigma: f64) -> f64 {
    // Σ [-log w - log σ - ½ log 2π - (log w - µ)² / 2σ²]
    -sum_l - n1 * sigma.ln() - 0.5 * n1 * (2.0 * std::f64::consts::PI).ln()
        - (sum_l2 - 2.0 * mu * sum_l + n1 * mu * mu) / (2.0 * sigma * sigma)
}

/// Log-normal moment-matching start: `σ² = ln(1 + s²/m²)`, `µ = ln m - σ²/2`.
fn moment_start(observed: &[f64]) -> (f64, f64) {
    let n = observed.len() as f64;
    let m = observed.iter().sum::<f64>() / n;
    let v = observed.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let s2 = (1.0 + v / (m * m)).ln().max(1e-12);
    (m.ln() - 0.5 * s2, s2.sqrt())
}

/// Fit a log-normal by EM from a moment-matching start.
pub fn fit_lognormal_em(samples: &[Option<f64>], cfg: &EmConfig) -> Result<EmFit> {
    let (observed, _) = split_observed(samples);
    validate_positive(&observed)?;
    let start = moment_start(&observed);
    fit_lognormal_em_from(samples, start, cfg)
}

fn validate_positive(observed: &[f64]) -> Result<()> {
    if let Some(x) = observed.iter().find(|&&x| x <= 0.0) {
        return Err(Error::domain(format!("log-normal needs positive samples, found {x}")));
    }
    if observed.len() < 2 {
        return Err(Error::insufficient(format!(
            "log-normal EM needs at least 2 observed values, got {}",
            observed.len()
        )));
    }
    Ok(())
}

/// EM from an explicit `(mu, sigma)` starting point.
pub fn fit_lognormal_em_from(samples: &[Option<f64>], start: (f64, f64), cfg: &EmConfig) -> Result<EmFit> {
    let (observed, n_missing) = split_observed(samples);
    validate_positive(&observed)?;
    if !(cfg.tol > 0.0) {
        return Err(Error::Config("EM tolerance must be positive".into()));
    }
    let n1 = observed.len() as f64;
    let n2 = n1 + n_missing as f64;
    let nm = n_missing as f64;
    let sum_l: f64 = observed.iter().map(|x| x.ln()).sum();
    let sum_l2: f64 = observed.iter().map(|x| x.ln().powi(2)).sum();

    let var_obs = sum_l2 / n1 - (sum_l / n1).powi(2);
    if var_obs <= 1e-14 * (sum_l / n1).abs().max(1.0) {
        let mu = sum_l / n1;
        let dist = Marginal::LogNormal { mu, sigma: 0.0 };
        let model = MarginalModel {
            dist,
            loglik: f64::INFINITY,
            aic: f64::NEG_INFINITY,
            bic: f64::NEG_INFINITY,
            ks: 0.0,
            n_obs: observed.len(),
            degenerate: true,
            em_iterations: Some(0),
            converged: false,
        };
        let state = EmState { iteration: 0, params: [mu, 0.0], q_value: f64::NAN, loglik_observed: f64::INFINITY };
        return Ok(EmFit { model, trace: vec![state], converged: false, iterations: 0 });
    }

    let (mut mu, mut sigma) = start;
    if !(sigma > 0.0) {
        sigma = var_obs.sqrt();
    }
    let mut ll = ln_observed_loglik(sum_l, sum_l2, n1, mu, sigma);
    let mut trace = vec![EmState { iteration: 0, params: [mu, sigma], q_value: f64::NAN, loglik_observed: ll }];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        // E-step: expected log w and (log w)^2 for each missing cell
        let e_l = mu;
        let e_l2 = sigma * sigma + mu * mu;
        let s1 = sum_l + nm * e_l;
        let s2 = sum_l2 + nm * e_l2;
        // M-step
        let mu_new = s1 / n2;
        let sigma_new = (s2 / n2 - mu_new * mu_new).max(0.0).sqrt();
        // Q at the new parameters; −E[log w] for missing cells is e_l
        let q = -(sum_l + nm * e_l) - n2 * sigma_new.ln() - 0.5 * n2 * (2.0 * std::f64::consts::PI).ln()
            - (s2 - 2.0 * mu_new * s1 + n2 * mu_new * mu_new) / (2.0 * sigma_new * sigma_new);
        let ll_new = ln_observed_loglik(sum_l, sum_l2, n1, mu_new, sigma_new);
        let step = (mu_new - mu).abs().max((sigma_new - sigma).abs());
        let dll = (ll_new - ll).abs();
        mu = mu_new;
        sigma = sigma_new;
        ll = ll_new;
        trace.push(EmState { iteration: it, params: [mu, sigma], q_value: q, loglik_observed: ll });
        iterations = it;
        if dll < cfg.tol && step < cfg.param_tol {
            converged = true;
            break;
        }
    }
    let mut model = MarginalModel::evaluate(Marginal::LogNormal { mu, sigma }, &observed);
    model.em_iterations = Some(iterations);
    model.converged = converged;
    Ok(EmFit { model, trace, converged, iterations })
}

/// Closed-form observed-data MLE `(mean log w, sd log w)` (divisor n).
pub fn lognormal_mle(observed: &[f64]) -> Result<(f64, f64)> {
    validate_positive(observed)?;
    let n = observed.len() as f64;
    let mu = observed.iter().map(|x| x.ln()).sum::<f64>() / n;
    let var = observed.iter().map(|x| (x.ln() - mu).powi(2)).sum::<f64>() / n;
    Ok((mu, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn complete_data_reaches_mle_in_one_step() {
        let xs = [3.0, 7.5, 12.0, 20.0, 4.4, 9.9];
        let samples: Vec<Option<f64>> = xs.iter().map(|&x| Some(x)).collect();
        let fit = fit_lognormal_em(&samples, &EmConfig::default()).unwrap();
        let (mu, sigma) = lognormal_mle(&xs).unwrap();
        let first = fit.trace[1].params;
        assert!((first[0] - mu).abs() < 1e-14);
        assert!((first[1] - sigma).abs() < 1e-14);
        assert!(fit.converged);
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let samples = vec![Some(E); 4];
        let fit = fit_lognormal_em(&samples, &EmConfig::default()).unwrap();
        assert!(fit.model.degenerate);
        match fit.model.dist {
            Marginal::LogNormal { mu, sigma } => {
                assert!((mu - 1.0).abs() < 1e-15);
                assert_eq!(sigma, 0.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn nonpositive_and_short_samples_error() {
        assert!(matches!(
            fit_lognormal_em(&[Some(1.0), Some(0.0)], &EmConfig::default()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fit_lognormal_em(&[Some(1.0), None, None], &EmConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn missing_cells_ascend_to_observed_mle() {
        let xs = [3.0, 7.5, 12.0, 20.0, 4.4, 9.9, 15.0, 2.2];
        let mut samples: Vec<Option<f64>> = xs.iter().map(|&x| Some(x)).collect();
        samples.extend([None, None, None, None]);
        let cfg = EmConfig { tol: 1e-14, param_tol: 1e-12, max_iter: 10_000 };
        let fit = fit_lognormal_em_from(&samples, (0.0, 3.0), &cfg).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1].loglik_observed >= w[0].loglik_observed - 1e-9);
        }
        let (mu, sigma) = lognormal_mle(&xs).unwrap();
        let [m, s] = fit.trace.last().unwrap().params;
        assert!((m - mu).abs() < 1e-9 && (s - sigma).abs() < 1e-9);
        assert!(fit.iterations > 5);
    }

    #[test]
    fn iteration_cap_flags_not_converged() {
        let samples = vec![Some(1.0), Some(5.0), None, None, None, None, None, None];
        let cfg = EmConfig { tol: 1e-14, param_tol: 1e-14, max_iter: 3 };
        let fit = fit_lognormal_em_from(&samples, (10.0, 5.0), &cfg).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 3);
        assert!(!fit.model.converged);
    }
}
