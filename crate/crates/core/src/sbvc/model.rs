use serde::{Deserialize, Serialize};

use crate::copulas::{build_cvine, fit_pair_copula, CopulaFamily, PairFitOptions, VineSpec};
use crate::data::StationDataset;
use crate::error::{Error, Result};
use crate::marginals::{fit_candidate, EmConfig, Family, MarginalModel};
use crate::sc::CoordMargins;

use super::mcmc::{metropolis_hastings, posterior_estimate, tune_proposal, Loss, PosteriorChain};
use super::prior::{log_posterior, PriorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SBVCConfig {
    pub n_iter: usize,
    /// Fraction of `n_iter` discarded.
    pub burn_in_frac: f64,
    pub seed: u64,
    pub loss: Loss,
    /// Defaults to uniform over each family's admissible box.
    pub priors: Option<PriorSpec>,
    /// Pilot runs toward 20-50% acceptance before sampling.
    pub tune: bool,
    pub pair_families: Vec<CopulaFamily>,
    pub target_family: Family,
    pub em: EmConfig,
    pub coord_pad: f64,
    /// Quantile grid size for conditional means.
    pub quadrature_points: usize,
}

impl Default for SBVCConfig {
    fn default() -> Self {
        SBVCConfig {
            n_iter: 50_000,
            burn_in_frac: 0.2,
            seed: 1,
            loss: Loss::SquaredError,
            priors: None,
            tune: true,
            pair_families: CopulaFamily::ALL.to_vec(),
            target_family: Family::LogNormal,
            em: EmConfig::default(),
            coord_pad: 0.1,
            quadrature_points: 256,
        }
    }
}

impl SBVCConfig {
    pub fn burn_in(&self) -> usize {
        (self.n_iter as f64 * self.burn_in_frac).round() as usize
    }
}

/// Vine over `(lon, lat, target_1, ...)` with posterior point estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SBVCModel {
    pub targets: Vec<String>,
    pub coord_margins: CoordMargins,
    pub target_marginals: Vec<MarginalModel>,
    /// Structure chosen by AIC, parameters at the posterior estimate.
    pub vine: VineSpec,
    pub mle_params: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub prior: Option<PriorSpec>,
    pub chain: Option<PosteriorChain>,
    pub quadrature_points: usize,
}

/// MH over the free parameters of `vine` on copula-scale `data`.
pub fn sample_posterior(vine: &VineSpec, data: &[Vec<f64>], prior: &PriorSpec, cfg: &SBVCConfig) -> Result<PosteriorChain> {
    prior.validate_for(vine)?;
    let init = vine.param_vector();
    let target = |t: &[f64]| log_posterior(t, data, vine, prior);
    let mut sd: Vec<f64> = prior.priors.iter().map(|p| 0.1 * p.range_sd()).collect();
    if cfg.tune {
        sd = tune_proposal(target, &init, &sd, cfg.seed, 500, 12)?;
    }
    metropolis_hastings(target, &sd, &init, cfg.n_iter, cfg.burn_in(), cfg.seed)
}

/// Fits the target marginals on station means, selects a C-vine with root
/// order `(lon, lat, targets...)`, then samples its parameters.
pub fn fit_sbvc_model(ds: &StationDataset, targets: &[&str], cfg: &SBVCConfig) -> Result<SBVCModel> {
    fit_sbvc_chains(ds, targets, cfg, 1).map(|(m, _)| m)
}

/// As [`fit_sbvc_model`] with `n_chains` chains seeded `seed, seed + 1, ...`.
/// The estimate pools every chain's post-burn-in draws; `SBVCModel::chain`
/// holds the first chain.
pub fn fit_sbvc_chains(ds: &StationDataset, targets: &[&str], cfg: &SBVCConfig, n_chains: usize) -> Result<(SBVCModel, Vec<PosteriorChain>)> {
    if n_chains == 0 {
        return Err(Error::Config("at least one chain is required".into()));
    }
    if targets.is_empty() || targets.len() > 3 {
        return Err(Error::Config("SBVC takes one to three target variables".into()));
    }
    let idx: Vec<usize> = targets.iter().map(|t| ds.variable_index(t)).collect::<Result<_>>()?;
    let mut rows: Vec<((f64, f64), Vec<f64>)> = Vec::new();
    for s in &ds.stations {
        let means: Option<Vec<f64>> = idx
            .iter()
            .map(|&v| {
                let xs: Vec<f64> = ds.station_values(&s.station_id, v).into_iter().flatten().collect();
                (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
            })
            .collect();
        if let Some(m) = means {
            rows.push((s.coords(), m));
        }
    }
    if rows.len() < 4 {
        return Err(Error::insufficient(format!("SBVC needs at least 4 stations with data, got {}", rows.len())));
    }
    let coords: Vec<(f64, f64)> = rows.iter().map(|r| r.0).collect();
    let coord_margins = CoordMargins::around(&coords, cfg.coord_pad)?;
    let target_marginals: Vec<MarginalModel> = (0..idx.len())
        .map(|k| {
            let xs: Vec<Option<f64>> = rows.iter().map(|r| Some(r.1[k])).collect();
            fit_candidate(cfg.target_family, &xs, &cfg.em)
        })
        .collect::<Result<_>>()?;
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|(p, m)| {
            let (u1, u2) = coord_margins.transform(*p);
            let mut row = vec![u1, u2];
            row.extend(m.iter().zip(&target_marginals).map(|(x, mm)| mm.dist.cdf(*x)));
            row
        })
        .collect();
    let d = 2 + idx.len();
    let opts = PairFitOptions::default();
    let vine = build_cvine(&data, (0..d).collect(), |u, v| fit_pair_copula(u, v, &cfg.pair_families, &opts))?;
    let mle_params = vine.param_vector();
    let (theta_hat, prior, chains) = if mle_params.is_empty() {
        (Vec::new(), None, Vec::new())
    } else {
        let prior = cfg.priors.clone().unwrap_or_else(|| PriorSpec::uniform_for(&vine));
        let chains: Vec<PosteriorChain> = (0..n_chains as u64)
            .map(|i| sample_posterior(&vine, &data, &prior, &SBVCConfig { seed: cfg.seed.wrapping_add(i), ..cfg.clone() }))
            .collect::<Result<_>>()?;
        let mut pooled = chains[0].clone();
        pooled.draws = chains.iter().flat_map(|c| c.draws.iter().cloned()).collect();
        (posterior_estimate(&pooled, cfg.loss)?, Some(prior), chains)
    };
    let vine = vine.with_params(&theta_hat)?;
    let chain = chains.first().cloned();
    let model = SBVCModel {
        targets: targets.iter().map(|s| s.to_string()).collect(),
        coord_margins,
        target_marginals,
        vine,
        mle_params,
        theta_hat,
        prior,
        chain,
        quadrature_points: cfg.quadrature_points,
    };
    Ok((model, chains))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMean {
    pub mean: f64,
    /// Conditional probability captured by the quadrature range.
    pub mass: f64,
}

/// Minimum conditional mass the quadrature must capture.
pub const MIN_MASS: f64 = 0.98;

fn conditional_mean_on(
    vine: &VineSpec,
    target: usize,
    conditioning: &[(usize, f64)],
    quantile: &dyn Fn(f64) -> f64,
    n: usize,
    tail: f64,
) -> Result<ConditionalMean> {
    let edges = crate::numeric::linspace(tail, 1.0 - tail, n + 1);
    let h: Vec<f64> = edges.iter().map(|&u| vine.conditional_cdf(target, u, conditioning)).collect::<Result<_>>()?;
    let mut mean = 0.0;
    for k in 0..n {
        let w = (h[k + 1] - h[k]).max(0.0);
        mean += w * quantile(0.5 * (edges[k] + edges[k + 1]));
    }
    let mass = h[n] - h[0];
    Ok(ConditionalMean { mean: if mass > 0.0 { mean / mass } else { f64::NAN }, mass })
}

/// `E[X_target | conditioning]` where `quantile` maps the copula scale to
/// the data scale. Cells between quantile levels are weighted by their exact
/// conditional probability; a wider, finer grid is tried if too little mass
/// is captured.
pub fn conditional_mean(
    vine: &VineSpec,
    target: usize,
    conditioning: &[(usize, f64)],
    quantile: &dyn Fn(f64) -> f64,
    n: usize,
) -> Result<ConditionalMean> {
    let first = conditional_mean_on(vine, target, conditioning, quantile, n, 1e-4)?;
    if first.mass >= MIN_MASS && first.mean.is_finite() {
        return Ok(first);
    }
    let second = conditional_mean_on(vine, target, conditioning, quantile, 4 * n, 1e-7)?;
    if second.mass >= MIN_MASS && second.mean.is_finite() {
        return Ok(second);
    }
    Err(Error::numerical(format!("conditional quadrature captured only {:.4} of the mass", second.mass)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SBVCPrediction {
    pub lon: f64,
    pub lat: f64,
    /// Conditional mean of each target.
    pub values: Vec<(String, f64)>,
    /// `E[X1 X2 | coordinates]` when there are at least two targets.
    pub joint_product_mean: Option<f64>,
    pub posterior_params: Vec<f64>,
    pub mass: Vec<f64>,
}

pub fn predict_sbvc(point: (f64, f64), model: &SBVCModel) -> Result<SBVCPrediction> {
    let (u1, u2) = model.coord_margins.transform(point);
    let cond = [(0usize, u1), (1usize, u2)];
    let mut values = Vec::with_capacity(model.targets.len());
    let mut mass = Vec::with_capacity(model.targets.len());
    for (k, name) in model.targets.iter().enumerate() {
        let m = &model.target_marginals[k].dist;
        let cm = conditional_mean(&model.vine, 2 + k, &cond, &|u| m.quantile(u), model.quadrature_points)?;
        values.push((name.clone(), cm.mean));
        mass.push(cm.mass);
    }
    let joint_product_mean = if model.targets.len() >= 2 { Some(product_moment(model, &cond)?) } else { None };
    Ok(SBVCPrediction { lon: point.0, lat: point.1, values, joint_product_mean, posterior_params: model.theta_hat.clone(), mass })
}

/// `∫∫ x1 x2 f(x1, x2 | coordinates)` over a 64 × 64 quantile grid.
fn product_moment(model: &SBVCModel, cond: &[(usize, f64)]) -> Result<f64> {
    let n = 64;
    let edges = crate::numeric::linspace(1e-4, 1.0 - 1e-4, n + 1);
    let (m1, m2) = (&model.target_marginals[0].dist, &model.target_marginals[1].dist);
    let mut total = 0.0;
    let mut mass = 0.0;
    for a in 0..n {
        let ua = 0.5 * (edges[a] + edges[a + 1]);
        let pa = model.vine.conditional_cdf(2, edges[a + 1], cond)? - model.vine.conditional_cdf(2, edges[a], cond)?;
        let mut c3 = cond.to_vec();
        c3.push((2, ua));
        for b in 0..n {
            let ub = 0.5 * (edges[b] + edges[b + 1]);
            let pb = model.vine.conditional_cdf(3, edges[b + 1], &c3)? - model.vine.conditional_cdf(3, edges[b], &c3)?;
            let w = pa.max(0.0) * pb.max(0.0);
            total += w * m1.quantile(ua) * m2.quantile(ub);
            mass += w;
        }
    }
    if mass < MIN_MASS {
        return Err(Error::numerical(format!("product moment quadrature captured only {mass:.4} of the mass")));
    }
    Ok(total / mass)
}

