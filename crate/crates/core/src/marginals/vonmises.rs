//! Von-Mises estimation: unbiased trigonometric-moment estimators and EM
//! under missing data.
//!
//! For `X ~ VM(µ, κ)`, `E[e^{inX}] = I_n(κ) e^{inµ} / I_0(κ)`, so
//! `T1 = I_0(κ) cos X / I_1(κ)` and `T2 = I_0(κ) sin X / I_1(κ)` are unbiased
//! for `cos µ` and `sin µ`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::brent_root;
use crate::special::{bessel_i_scaled, bessel_ratio, ln_bessel_i0};

use super::dist::{Marginal, MarginalModel};
use super::em::{split_observed, EmConfig, EmFit, EmState};

/// Concentration bracket used when inverting `A(κ) = R̄`.
pub const KAPPA_MIN: f64 = 1e-6;
pub const KAPPA_MAX: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VMFit {
    pub n: usize,
    /// Concentration plugged into the T1/T2 statistics.
    pub kappa_used: f64,
    pub t1_mean: f64,
    pub t2_mean: f64,
    /// Standard errors of the two means (sample sd / sqrt n).
    pub t1_se: f64,
    pub t2_se: f64,
    pub mu_hat: f64,
    pub kappa_hat: f64,
    pub var_cos: f64,
    pub var_sin: f64,
    /// `κ̂` hit the upper bracket (resultant length at or near one).
    pub degenerate: bool,
}

/// `var(cos X)` and `var(sin X)` for `X ~ VM(µ, κ)`:
///
/// ```text
/// var(cos X) = 1/2 + I2 cos 2µ / (2 I0) - (I1 cos µ / I0)^2
/// var(sin X) = 1/2 - I2 cos 2µ / (2 I0) - (I1 sin µ / I0)^2
/// ```
pub fn trig_variances(mu: f64, kappa: f64) -> (f64, f64) {
    let (i0, i1, i2) = (bessel_i_scaled(0, kappa), bessel_i_scaled(1, kappa), bessel_i_scaled(2, kappa));
    let r2 = i2 / i0;
    let r1 = i1 / i0;
    let var_cos = 0.5 + r2 * (2.0 * mu).cos() / 2.0 - (r1 * mu.cos()).powi(2);
    let var_sin = 0.5 - r2 * (2.0 * mu).cos() / 2.0 - (r1 * mu.sin()).powi(2);
    (var_cos.max(0.0), var_sin.max(0.0))
}

/// The sine variance written with `sin 2µ` in place of `cos 2µ` in the middle
/// term. Kept for comparison only: it is not the variance of `sin X`
/// (it disagrees with [`trig_variances`] whenever `I_2(κ) > 0`).
pub fn sin_variance_sin2mu_form(mu: f64, kappa: f64) -> f64 {
    let (i0, i1, i2) = (bessel_i_scaled(0, kappa), bessel_i_scaled(1, kappa), bessel_i_scaled(2, kappa));
    0.5 - (i2 / i0) * (2.0 * mu).sin() / 2.0 - ((i1 / i0) * mu.sin()).powi(2)
}

/// Solve `I_1(κ)/I_0(κ) = r` by bisection on `[KAPPA_MIN, KAPPA_MAX]` followed
/// by Newton polishing.
pub fn invert_mean_resultant(r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) || r.is_nan() {
        return Err(Error::domain(format!("mean resultant length must lie in [0, 1], got {r}")));
    }
    if r <= bessel_ratio(KAPPA_MIN) {
        return Err(Error::numerical(
            "concentration underflow: resultant length is zero (data look uniform)",
        ));
    }
    if r >= bessel_ratio(KAPPA_MAX) {
        return Err(Error::degenerate("concentration diverges: resultant length is one"));
    }
    let mut k = brent_root(|k| bessel_ratio(k) - r, KAPPA_MIN, KAPPA_MAX, 1e-10, 200)?;
    for _ in 0..3 {
        let a = bessel_ratio(k);
        let da = 1.0 - a / k - a * a;
        if da <= 0.0 {
            break;
        }
        let next = k - (a - r) / da;
        if !(KAPPA_MIN..=KAPPA_MAX).contains(&next) {
            break;
        }
        k = next;
    }
    Ok(k)
}

fn check_angles(xs: &[f64]) -> Result<()> {
    if let Some(x) = xs.iter().find(|x| !(0.0..TAU).contains(*x)) {
        return Err(Error::domain(format!("angle {x} outside [0, 2π)")));
    }
    Ok(())
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Unbiased trigonometric-moment estimates of the Von-Mises location, with
/// `κ̂` from inverting the mean resultant length.
pub fn fit_vonmises_umvue(samples: &[f64], kappa_init: f64) -> Result<VMFit> {
    if samples.len() < 2 {
        return Err(Error::insufficient("Von-Mises UMVUE needs at least 2 samples"));
    }
    if !(kappa_init > 0.0 && kappa_init.is_finite()) {
        return Err(Error::domain(format!("kappa_init must be positive, got {kappa_init}")));
    }
    check_angles(samples)?;
    let n = samples.len() as f64;
    let scale = bessel_i_scaled(0, kappa_init) / bessel_i_scaled(1, kappa_init);
    let t1: Vec<f64> = samples.iter().map(|x| scale * x.cos()).collect();
    let t2: Vec<f64> = samples.iter().map(|x| scale * x.sin()).collect();
    let mean_sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    };
    let (t1_mean, t1_se) = mean_sd(&t1);
    let (t2_mean, t2_se) = mean_sd(&t2);
    let mu_hat = wrap(t2_mean.atan2(t1_mean));
    let r_bar = (t1_mean.powi(2) + t2_mean.powi(2)).sqrt() / scale;
    let (kappa_hat, degenerate) = match invert_mean_resultant(r_bar.min(1.0)) {
        Ok(k) => (k, false),
        Err(Error::Degenerate(_)) => (KAPPA_MAX, true),
        Err(e) => return Err(e),
    };
    let (var_cos, var_sin) = trig_variances(mu_hat, kappa_hat);
    Ok(VMFit {
        n: samples.len(),
        kappa_used: kappa_init,
        t1_mean,
        t2_mean,
        t1_se,
        t2_se,
        mu_hat,
        kappa_hat,
        var_cos,
        var_sin,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VmEmConfig {
    pub em: EmConfig,
    /// Concentration used by the UMVUE starting step and as `κ` start.
    pub kappa_init: f64,
}

impl Default for VmEmConfig {
    fn default() -> Self {
        VmEmConfig { em: EmConfig::default(), kappa_init: 1.0 }
    }
}

fn vm_loglik(sum_cos: f64, sum_sin: f64, n: f64, mu: f64, kappa: f64) -> f64 {
    // Σ κ cos(x - µ) = κ (cos µ Σ cos x + sin µ Σ sin x)
    kappa * (mu.cos() * sum_cos + mu.sin() * sum_sin) - n * (TAU.ln() + ln_bessel_i0(kappa))
}

fn degenerate_vm(mu: f64, observed: &[f64]) -> EmFit {
    let dist = Marginal::VonMises { mu: wrap(mu), kappa: KAPPA_MAX };
    let mut model = MarginalModel::evaluate(dist, observed);
    model.degenerate = true;
    model.converged = false;
    model.em_iterations = Some(0);
    let state = EmState { iteration: 0, params: [wrap(mu), KAPPA_MAX], q_value: f64::NAN, loglik_observed: model.loglik };
    EmFit { model, trace: vec![state], converged: false, iterations: 0 }
}

/// EM for `(µ, κ)` of a Von-Mises law with missing cells. The E-step fills
/// the missing `cos w`, `sin w` with `A(κ) cos µ`, `A(κ) sin µ`; the M-step
/// sets `µ = atan2(S, C)` and `κ = A^{-1}(sqrt(C² + S²))`.
pub fn fit_vonmises_em(samples: &[Option<f64>], cfg: &VmEmConfig) -> Result<EmFit> {
    let (observed, n_missing) = split_observed(samples);
    check_angles(&observed)?;
    if observed.is_empty() {
        return Err(Error::insufficient("Von-Mises EM needs at least one observed angle"));
    }
    if observed.len() == 1 {
        return Ok(degenerate_vm(observed[0], &observed));
    }
    let start = fit_vonmises_umvue(&observed, cfg.kappa_init)?;
    if start.degenerate {
        return Ok(degenerate_vm(start.mu_hat, &observed));
    }
    let n1 = observed.len() as f64;
    let nm = n_missing as f64;
    let n2 = n1 + nm;
    let sum_cos: f64 = observed.iter().map(|x| x.cos()).sum();
    let sum_sin: f64 = observed.iter().map(|x| x.sin()).sum();

    let (mut mu, mut kappa) = (start.mu_hat, cfg.kappa_init);
    let mut ll = vm_loglik(sum_cos, sum_sin, n1, mu, kappa);
    let mut trace = vec![EmState { iteration: 0, params: [mu, kappa], q_value: f64::NAN, loglik_observed: ll }];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.em.max_iter {
        let a = bessel_ratio(kappa);
        let c = (sum_cos + nm * a * mu.cos()) / n2;
        let s = (sum_sin + nm * a * mu.sin()) / n2;
        let mu_new = wrap(s.atan2(c));
        let kappa_new = match invert_mean_resultant((c * c + s * s).sqrt().min(1.0)) {
            Ok(k) => k,
            Err(Error::Degenerate(_)) => return Ok(degenerate_vm(mu_new, &observed)),
            Err(e) => return Err(e),
        };
        let q = kappa_new * n2 * (mu_new.cos() * c + mu_new.sin() * s) - n2 * (TAU.ln() + ln_bessel_i0(kappa_new));
        let ll_new = vm_loglik(sum_cos, sum_sin, n1, mu_new, kappa_new);
        let dmu = {
            let d = (mu_new - mu).abs();
            d.min(TAU - d)
        };
        let step = dmu.max((kappa_new - kappa).abs());
        let dll = (ll_new - ll).abs();
        mu = mu_new;
        kappa = kappa_new;
        ll = ll_new;
        trace.push(EmState { iteration: it, params: [mu, kappa], q_value: q, loglik_observed: ll });
        iterations = it;
        if dll < cfg.em.tol && step < cfg.em.param_tol {
            converged = true;
            break;
        }
    }
    let mut model = MarginalModel::evaluate(Marginal::VonMises { mu, kappa }, &observed);
    model.em_iterations = Some(iterations);
    model.converged = converged;
    Ok(EmFit { model, trace, converged, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_i;

    #[test]
    fn zero_samples_give_known_t_means() {
        let fit = fit_vonmises_umvue(&[0.0; 5], 2.0).unwrap();
        let want = bessel_i(0, 2.0).unwrap() / bessel_i(1, 2.0).unwrap();
        assert!((fit.t1_mean - want).abs() < 1e-12);
        assert_eq!(fit.t2_mean, 0.0);
        assert_eq!(fit.mu_hat, 0.0);
        assert!(fit.degenerate);
    }

    #[test]
    fn sin2mu_form_at_zero_location_is_one_half() {
        for &k in &[0.5, 2.0, 5.0] {
            assert!((sin_variance_sin2mu_form(0.0, k) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn variances_at_symmetric_point() {
        // µ = 0: var(sin X) = 1/2 - I2/(2 I0) = I1 / (κ I0)
        for &k in &[0.5, 2.0, 5.0] {
            let (_, vs) = trig_variances(0.0, k);
            let want = bessel_i(1, k).unwrap() / (k * bessel_i(0, k).unwrap());
            assert!((vs - want).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_like_data_underflow() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * TAU / 8.0).collect();
        assert!(matches!(fit_vonmises_umvue(&xs, 1.0), Err(Error::Numerical(_))));
    }

    #[test]
    fn inversion_round_trip() {
        for &k in &[0.01, 0.5, 2.0, 10.0, 300.0] {
            let r = bessel_ratio(k);
            let back = invert_mean_resultant(r).unwrap();
            assert!(((back - k) / k).abs() < 1e-8, "{k} -> {back}");
        }
    }

    #[test]
    fn single_observation_is_degenerate() {
        let fit = fit_vonmises_em(&[Some(1.0), None, None], &VmEmConfig::default()).unwrap();
        assert!(fit.model.degenerate);
    }

    #[test]
    fn angles_out_of_range_rejected() {
        assert!(matches!(fit_vonmises_umvue(&[0.5, 7.0], 1.0), Err(Error::Domain(_))));
    }
}
