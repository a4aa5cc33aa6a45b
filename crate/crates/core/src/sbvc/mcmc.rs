use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    /// Post-burn-in draws.
    pub draws: Vec<Vec<f64>>,
    /// Log target at every iteration, burn-in included.
    pub log_posterior: Vec<f64>,
    /// Accepted fraction of post-burn-in proposals.
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub proposal_sd: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Gaussian random-walk Metropolis. `target` may return `-inf`; such
/// proposals are always rejected.
pub fn metropolis_hastings<F: Fn(&[f64]) -> f64>(
    target: F,
    proposal_sd: &[f64],
    init: &[f64],
    n_iter: usize,
    burn_in: usize,
    seed: u64,
) -> Result<PosteriorChain> {
    if proposal_sd.len() != init.len() {
        return Err(Error::domain("proposal_sd and init differ in length"));
    }
    if init.is_empty() {
        return Err(Error::domain("nothing to sample: zero parameters"));
    }
    if proposal_sd.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::degenerate("proposal standard deviations must be positive"));
    }
    if n_iter <= burn_in {
        return Err(Error::Config(format!("n_iter ({n_iter}) must exceed burn_in ({burn_in})")));
    }
    let mut cur = init.to_vec();
    let mut cur_lp = target(&cur);
    if !cur_lp.is_finite() {
        return Err(Error::domain(format!("target is not finite at the initial point ({cur_lp})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n_iter - burn_in);
    let mut trace = Vec::with_capacity(n_iter);
    let mut accepted = 0;
    let mut prop = cur.clone();
    for it in 0..n_iter {
        for ((p, c), s) in prop.iter_mut().zip(&cur).zip(proposal_sd) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = c + s * z;
        }
        let lp = target(&prop);
        let u: f64 = rand::Rng::random(&mut rng);
        let ok = lp > f64::NEG_INFINITY && u.ln() < lp - cur_lp;
        if ok {
            cur.copy_from_slice(&prop);
            cur_lp = lp;
        }
        trace.push(cur_lp);
        if it >= burn_in {
            accepted += ok as usize;
            draws.push(cur.clone());
        }
    }
    let acceptance_rate = accepted as f64 / (n_iter - burn_in) as f64;
    let mut warnings = Vec::new();
    if !(0.05..=0.95).contains(&acceptance_rate) {
        warnings.push(format!("acceptance rate {acceptance_rate:.3} is outside [0.05, 0.95]; retune the proposal"));
    }
    Ok(PosteriorChain {
        draws,
        log_posterior: trace,
        acceptance_rate,
        accepted,
        n_iter,
        burn_in,
        seed,
        proposal_sd: proposal_sd.to_vec(),
        warnings,
    })
}

/// Scale the proposal with short pilot runs until acceptance lands in
/// `[0.2, 0.5]` (or the round budget runs out).
pub fn tune_proposal<F: Fn(&[f64]) -> f64>(target: F, init: &[f64], sd: &[f64], seed: u64, pilot: usize, rounds: usize) -> Result<Vec<f64>> {
    let mut sd = sd.to_vec();
    let mut start = init.to_vec();
    for r in 0..rounds {
        let c = metropolis_hastings(&target, &sd, &start, pilot, 0, seed.wrapping_add(1 + r as u64))?;
        let a = c.acceptance_rate;
        if (0.2..=0.5).contains(&a) {
            break;
        }
        let f = if a < 0.2 { (a / 0.3).max(0.1) } else { (a / 0.3).min(3.0) };
        sd.iter_mut().for_each(|s| *s *= f);
        if let Some(last) = c.draws.last() {
            start = last.clone();
        }
    }
    Ok(sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Posterior mean.
    SquaredError,
    /// Posterior median.
    AbsoluteError,
}

impl std::str::FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "squared_error" | "squared" | "mean" => Ok(Loss::SquaredError),
            "absolute_error" | "absolute" | "median" => Ok(Loss::AbsoluteError),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Component-wise posterior mean or median.
pub fn posterior_estimate(chain: &PosteriorChain, loss: Loss) -> Result<Vec<f64>> {
    let Some(first) = chain.draws.first() else {
        return Err(Error::insufficient("chain has no post-burn-in draws"));
    };
    let n = chain.draws.len() as f64;
    Ok((0..first.len())
        .map(|j| {
            let col = chain.draws.iter().map(|d| d[j]);
            match loss {
                Loss::SquaredError => col.sum::<f64>() / n,
                Loss::AbsoluteError => median(col.collect()),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    /// `(iteration, draw)` every `thin` post-burn-in iterations.
    pub thinned: Vec<(usize, Vec<f64>)>,
    /// Running means at the thinned iterations.
    pub running_mean: Vec<(usize, Vec<f64>)>,
    /// Per parameter: first-half mean minus second-half mean.
    pub split_gap: Vec<f64>,
    /// Per parameter: batch-means standard error of that gap.
    pub pooled_se: Vec<f64>,
    pub non_converged: bool,
}

fn batch_se(xs: &[f64]) -> f64 {
    let b = xs.len().min(20);
    let size = xs.len() / b;
    let means: Vec<f64> = (0..b).map(|i| xs[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / b as f64;
    if b < 2 {
        return 0.0;
    }
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Split-half comparison: a gap above 3 standard errors flags the chain.
pub fn chain_diagnostics(chain: &PosteriorChain, thin: usize) -> Result<ChainDiagnostics> {
    let n = chain.draws.len();
    if n < 4 {
        return Err(Error::insufficient("chain diagnostics need at least 4 post-burn-in draws"));
    }
    let thin = thin.max(1);
    let p = chain.draws[0].len();
    let mut sums = vec![0.0; p];
    let mut thinned = Vec::new();
    let mut running_mean = Vec::new();
    for (i, d) in chain.draws.iter().enumerate() {
        for (s, x) in sums.iter_mut().zip(d) {
            *s += x;
        }
        if i % thin == 0 {
            let it = chain.burn_in + i;
            thinned.push((it, d.clone()));
            running_mean.push((it, sums.iter().map(|s| s / (i + 1) as f64).collect()));
        }
    }
    let half = n / 2;
    let mut split_gap = Vec::with_capacity(p);
    let mut pooled_se = Vec::with_capacity(p);
    let mut flag = false;
    for j in 0..p {
        let a: Vec<f64> = chain.draws[..half].iter().map(|d| d[j]).collect();
        let b: Vec<f64> = chain.draws[n - half..].iter().map(|d| d[j]).collect();
        let gap = a.iter().sum::<f64>() / half as f64 - b.iter().sum::<f64>() / half as f64;
        let se = (batch_se(&a).powi(2) + batch_se(&b).powi(2)).sqrt();
        flag |= gap.abs() > 3.0 * se;
        split_gap.push(gap);
        pooled_se.push(se);
    }
    Ok(ChainDiagnostics { acceptance_rate: chain.acceptance_rate, thinned, running_mean, split_gap, pooled_se, non_converged: flag })
}
