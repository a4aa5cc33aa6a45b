use rayon::prelude::*;

use crate::error::{Error, Result};

use super::dist::{Family, MarginalModel};
use super::em::{fit_lognormal_em, split_observed, EmConfig};
use super::mle::fit_family_mle;
use super::vonmises::{fit_vonmises_em, VmEmConfig};

/// Fit one candidate, routing the EM-capable families through EM.
pub fn fit_candidate(family: Family, samples: &[Option<f64>], em: &EmConfig) -> Result<MarginalModel> {
    let model = match family {
        Family::LogNormal => fit_lognormal_em(samples, em)?.model,
        Family::VonMises => fit_vonmises_em(samples, &VmEmConfig { em: *em, ..VmEmConfig::default() })?.model,
        f => fit_family_mle(f, &split_observed(samples).0)?,
    };
    if model.degenerate {
        return Err(Error::degenerate(format!("{family:?} fit is degenerate")));
    }
    Ok(model)
}

/// Fit every candidate and rank the successes by AIC, then BIC, then KS.
pub fn select_marginal(samples: &[Option<f64>], candidates: &[Family], em: &EmConfig) -> Result<Vec<MarginalModel>> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate families given".into()));
    }
    let results: Vec<(Family, Result<MarginalModel>)> =
        candidates.par_iter().map(|&f| (f, fit_candidate(f, samples, em))).collect();
    let mut failures = Vec::new();
    let mut models = Vec::new();
    for (f, r) in results {
        match r {
            Ok(m) => models.push(m),
            Err(e) => failures.push(format!("{f:?}: {e}")),
        }
    }
    if models.is_empty() {
        return Err(Error::AllFailed(failures));
    }
    models.sort_by(|a, b| a.aic.total_cmp(&b.aic).then(a.bic.total_cmp(&b.bic)).then(a.ks.total_cmp(&b.ks)));
    Ok(models)
}
