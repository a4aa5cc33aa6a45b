//! Acceptance suite. Prints one `PASS`/`FAIL`/`SKIP` line per criterion and
//! exits non-zero when any criterion fails.
//!
//! Criterion 11 reads a Delhi station export from `SCOPULA_CPCB_CSV` and is
//! skipped when the variable is unset.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use scopula::copulas::{empirical_tail_dependence, CopulaFamily, PairCopula, Rotation, VineSpec};
use scopula::data::{Observation, StationDataset, StationRecord};
use scopula::marginals::{fit_lognormal_em, fit_vonmises_umvue, lognormal_mle, trig_variances, EmConfig, Marginal};
use scopula::sbvc::{metropolis_hastings, SBVCConfig};
use scopula::sc::*;
use scopula::spatial::{haversine_m, regions, BBox, ClusterConfig, GridSpec, VariogramFamily, VariogramModel};
use scopula::validation::*;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within_budget(out: Outcome, took: Duration, budget: Option<Duration>) -> Outcome {
    match (out, budget) {
        (Outcome::Pass(d), Some(b)) if took > b => Outcome::Fail(format!("{d}; over the {:.0} s budget", b.as_secs_f64())),
        (o, _) => o,
    }
}

// ---------------------------------------------------------------- 1

fn em_fixed_point() -> Outcome {
    let cfg = EmConfig { tol: 1e-14, param_tol: 1e-12, max_iter: 100_000 };
    let (mut dmu, mut dsigma) = (0.0f64, 0.0f64);
    let mut bad_traces = 0;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ln = rand_distr::LogNormal::new(4.0, 0.8).unwrap();
        let xs: Vec<Option<f64>> =
            (0..500)
                .map(|_| {
                    let x = ln.sample(&mut rng);
                    if rng.random::<f64>() < 0.2 { None } else { Some(x) }
                })
                .collect();
        let observed: Vec<f64> = xs.iter().flatten().copied().collect();
        let (mu, sigma) = lognormal_mle(&observed).unwrap();
        let fit = match fit_lognormal_em(&xs, &cfg) {
            Ok(f) => f,
            Err(e) => return Outcome::Fail(format!("seed {seed}: {e}")),
        };
        let Marginal::LogNormal { mu: m, sigma: s } = fit.model.dist else {
            return Outcome::Fail("EM returned a non-log-normal model".into());
        };
        dmu = dmu.max((m - mu).abs());
        dsigma = dsigma.max((s - sigma).abs());
        let lls: Vec<f64> = fit.trace.iter().map(|t| t.loglik_observed).collect();
        if lls.windows(2).any(|w| w[1] < w[0] - 1e-12 * w[0].abs()) {
            bad_traces += 1;
        }
    }
    verdict(
        dmu < 1e-6 && dsigma < 1e-6 && bad_traces == 0,
        format!("max |Δµ| = {dmu:.2e}, max |Δσ| = {dsigma:.2e}, decreasing traces = {bad_traces}/50"),
    )
}

// ---------------------------------------------------------------- 2

/// Best-Fisher rejection sampler.
fn sample_vonmises(rng: &mut ChaCha8Rng, mu: f64, kappa: f64, n: usize) -> Vec<f64> {
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = mu + if u3 > 0.5 { f.acos() } else { -f.acos() };
            out.push(theta.rem_euclid(TAU).min(TAU - 1e-15));
        }
    }
    out
}

fn vonmises_umvue() -> Outcome {
    let mut worst_z: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    let mut seed = 0;
    for &kappa in &[0.5, 2.0, 5.0] {
        for &mu in &[0.0, 1.0, 3.0] {
            seed += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs = sample_vonmises(&mut rng, mu, kappa, 100_000);
            let fit = fit_vonmises_umvue(&xs, kappa).unwrap();
            worst_z = worst_z.max((fit.t1_mean - mu.cos()).abs() / fit.t1_se).max((fit.t2_mean - mu.sin()).abs() / fit.t2_se);
            let n = xs.len() as f64;
            let var = |f: fn(f64) -> f64| {
                let m = xs.iter().map(|&x| f(x)).sum::<f64>() / n;
                xs.iter().map(|&x| (f(x) - m).powi(2)).sum::<f64>() / (n - 1.0)
            };
            let (vc, vs) = trig_variances(mu, kappa);
            worst_var = worst_var.max((var(f64::cos) - vc).abs() / vc).max((var(f64::sin) - vs).abs() / vs);
        }
    }
    verdict(worst_z < 3.0 && worst_var < 0.05, format!("max |T - target|/SE = {worst_z:.2}, max relative variance error = {worst_var:.4}"))
}

// ---------------------------------------------------------------- 3

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn settings(family: CopulaFamily) -> Vec<Vec<f64>> {
    match family {
        CopulaFamily::Independence => vec![vec![]; 5],
        CopulaFamily::Gaussian => vec![vec![-0.7], vec![-0.3], vec![0.1], vec![0.5], vec![0.8]],
        CopulaFamily::StudentT => vec![vec![-0.6, 4.0], vec![-0.2, 10.0], vec![0.0, 6.0], vec![0.4, 3.0], vec![0.7, 8.0]],
        CopulaFamily::Clayton => vec![vec![0.3], vec![0.8], vec![1.5], vec![3.0], vec![5.0]],
        CopulaFamily::Frank => vec![vec![-8.0], vec![-2.0], vec![0.5], vec![4.0], vec![10.0]],
        CopulaFamily::Gumbel => vec![vec![1.1], vec![1.5], vec![2.0], vec![3.0], vec![4.0]],
        CopulaFamily::Joe => vec![vec![1.2], vec![1.6], vec![2.2], vec![3.0], vec![4.0]],
        CopulaFamily::Tawn2 => vec![vec![1.5, 0.3], vec![2.0, 0.7], vec![3.0, 0.5], vec![1.2, 0.9], vec![4.0, 0.2]],
    }
}

fn copula_calibration() -> Outcome {
    const N: u64 = 1 << 16;
    let pts: Vec<(f64, f64)> = (1..=N).map(|i| (radical_inverse(i, 2), radical_inverse(i, 3))).collect();
    let (mut worst_mass, mut worst_h) = (0.0f64, 0.0f64);
    let mut worst_at = String::new();
    let step = 1e-5;
    for family in CopulaFamily::ALL {
        for (k, p) in settings(family).into_iter().enumerate() {
            let rot = if family.rotatable() { Rotation::ALL[k % 4] } else { Rotation::R0 };
            let c = PairCopula::new(family, rot, p.clone()).unwrap();
            let mass = pts.iter().map(|&(u, v)| c.density(u, v)).sum::<f64>() / N as f64;
            if (mass - 1.0).abs() > worst_mass {
                worst_mass = (mass - 1.0).abs();
                worst_at = format!("{family:?}{p:?}/{}", rot.degrees());
            }
            for i in 0..20 {
                for j in 0..20 {
                    let (u, v) = ((i as f64 + 0.5) / 20.0, (j as f64 + 0.5) / 20.0);
                    let du = (c.cdf(u + step, v) - c.cdf(u - step, v)) / (2.0 * step);
                    let dv = (c.cdf(u, v + step) - c.cdf(u, v - step)) / (2.0 * step);
                    worst_h = worst_h.max((c.h_given_first(u, v) - du).abs()).max((c.h_given_second(u, v) - dv).abs());
                }
            }
        }
    }
    verdict(
        worst_mass <= 0.01 && worst_h <= 1e-4,
        format!("max |∫c - 1| = {worst_mass:.2e} ({worst_at}), max |h - ∂C| = {worst_h:.2e}"),
    )
}

// ---------------------------------------------------------------- 4

fn pc(f: CopulaFamily, r: Rotation, p: &[f64]) -> PairCopula {
    PairCopula::new(f, r, p.to_vec()).unwrap()
}

fn vine_fidelity() -> Outcome {
    use CopulaFamily::*;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst: f64 = 0.0;

    let order3 = vec![2, 0, 1];
    let t3 = vec![vec![pc(Gaussian, Rotation::R0, &[0.6]), pc(Clayton, Rotation::R90, &[1.3])], vec![pc(Frank, Rotation::R0, &[3.0])]];
    let v3 = VineSpec::from_copulas(order3.clone(), t3.clone()).unwrap();
    for _ in 0..20 {
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(0.02..0.98)).collect();
        let (a, b, c) = (u[order3[0]], u[order3[1]], u[order3[2]]);
        let direct = t3[0][0].density(a, b)
            * t3[0][1].density(a, c)
            * t3[1][0].density(t3[0][0].h_given_first(a, b), t3[0][1].h_given_first(a, c));
        worst = worst.max((v3.density(&u).unwrap() - direct).abs() / direct);
    }

    let order4 = vec![1, 3, 0, 2];
    let t4 = vec![
        vec![pc(Gumbel, Rotation::R0, &[1.8]), pc(StudentT, Rotation::R0, &[0.4, 5.0]), pc(Joe, Rotation::R180, &[1.5])],
        vec![pc(Clayton, Rotation::R0, &[0.9]), pc(Gaussian, Rotation::R0, &[-0.3])],
        vec![pc(Tawn2, Rotation::R270, &[2.0, 0.6])],
    ];
    let v4 = VineSpec::from_copulas(order4.clone(), t4.clone()).unwrap();
    for _ in 0..20 {
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(0.02..0.98)).collect();
        let x: Vec<f64> = order4.iter().map(|&r| u[r]).collect();
        let tree0: f64 = (1..4).map(|k| t4[0][k - 1].density(x[0], x[k])).product();
        let f1: Vec<f64> = (1..4).map(|k| t4[0][k - 1].h_given_first(x[0], x[k])).collect();
        let tree1: f64 = (2..4).map(|k| t4[1][k - 2].density(f1[0], f1[k - 1])).product();
        let f2: Vec<f64> = (2..4).map(|k| t4[1][k - 2].h_given_first(f1[0], f1[k - 1])).collect();
        let direct = tree0 * tree1 * t4[2][0].density(f2[0], f2[1]);
        worst = worst.max((v4.density(&u).unwrap() - direct).abs() / direct);
    }
    verdict(worst < 1e-8, format!("max relative gap = {worst:.2e} over 40 points"))
}

// ---------------------------------------------------------------- 5

fn clayton_tails() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, &theta) in [0.5, 1.0, 2.0].iter().enumerate() {
        let c = pc(CopulaFamily::Clayton, Rotation::R0, &[theta]);
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i as u64);
        let (u, v): (Vec<f64>, Vec<f64>) = c.sample(&mut rng, 100_000).into_iter().unzip();
        let t = empirical_tail_dependence(&u, &v, &[0.01, 0.99]).unwrap();
        let target = 2f64.powf(-1.0 / theta);
        ok &= (t.lambda_lower - target).abs() <= 0.05 && t.lambda_upper < 0.05;
        lines.push(format!("θ={theta}: λL {:.3} vs {target:.3}, λU {:.3}", t.lambda_lower, t.lambda_upper));
    }
    verdict(ok, lines.join("; "))
}

// ---------------------------------------------------------------- 6

fn weights_and_separation() -> Outcome {
    let cfg = SCConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_sum, mut d_out, mut errors) = (0.0f64, 0usize, 0usize);
    let (mut d_min, mut d_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut identical_ok = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..=5);
        let pts: Vec<(f64, f64)> = (0..=n).map(|_| (rng.random_range(76.9..77.3), rng.random_range(28.45..28.85))).collect();
        let cm = CoordMargins::around(&pts, 0.1).unwrap();
        let joint = JointCopula::clayton(rng.random_range(0.1..4.0)).unwrap();
        let y = Marginal::LogNormal { mu: rng.random_range(3.0..5.0), sigma: rng.random_range(0.3..1.2) };
        let vgm = VariogramModel::new(VariogramFamily::Exponential, 0.0, 1.0, rng.random_range(2_000.0..30_000.0), 0.5).unwrap();
        let grid = YGrid::from_marginal(&y, &cfg).unwrap();
        let conds: Vec<StationConditional> =
            match pts.iter().enumerate().map(|(i, &p)| station_conditional(&joint, &cm, &y, &format!("s{i}"), p, &grid)).collect() {
                Ok(c) => c,
                Err(_) => {
                    errors += 1;
                    continue;
                }
            };
        let neighbors: Vec<&StationConditional> = conds[1..].iter().collect();
        match weights(&conds[0], &neighbors, &vgm, &y, &cfg) {
            Ok(w) => {
                worst_sum = worst_sum.max((w.sum() - 1.0).abs());
                for e in &w.entries {
                    d_min = d_min.min(e.d);
                    d_max = d_max.max(e.d);
                    if !(cfg.epsilon..=cfg.epsilon + 1.0).contains(&e.d) {
                        d_out += 1;
                    }
                }
            }
            Err(_) => errors += 1,
        }
        let same = separation_degree(&conds[0], &conds[0], &y, &cfg).unwrap();
        identical_ok &= same == cfg.epsilon + 1.0 && (same - 1.4224).abs() < 1e-15;
    }
    verdict(
        worst_sum <= 1e-10 && d_out == 0 && errors == 0 && identical_ok,
        format!(
            "max |Σα - 1| = {worst_sum:.1e}, d in [{d_min:.4}, {d_max:.4}], out of range = {d_out}, errors = {errors}, identical d = 1.4224: {identical_ok}"
        ),
    )
}

// ---------------------------------------------------------------- 7

fn layout_dataset(seed: u64) -> StationDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [(77.00, 28.50), (77.20, 28.52), (77.10, 28.68)];
    let d0 = chrono::NaiveDate::from_ymd_opt(2020, 11, 1).unwrap();
    let mut ds = StationDataset { stations: vec![], series: Default::default(), variables: vec!["pm25".into()] };
    let ln = rand_distr::LogNormal::new(4.4, 0.5).unwrap();
    for (c, &(lon, lat)) in centers.iter().enumerate() {
        for s in 0..5 {
            let id = format!("C{c}S{s}");
            let p = (lon + rng.random_range(-0.02..0.02), lat + rng.random_range(-0.02..0.02));
            ds.stations.push(StationRecord { station_id: id.clone(), lon: p.0, lat: p.1 });
            let obs = (0..20)
                .map(|d| Observation { date: d0 + chrono::Days::new(d), values: vec![Some(ln.sample(&mut rng) * (1.0 + c as f64 * 0.3))] })
                .collect();
            ds.series.insert(id, obs);
        }
    }
    ds
}

fn algorithm_structure() -> Outcome {
    let ds = layout_dataset(7);
    let opts = SCFitOptions {
        variogram: Some(VariogramModel::new(VariogramFamily::Exponential, 0.0, 1.0, 10_000.0, 0.5).unwrap()),
        cluster: ClusterConfig { k: Some(3), hd_cut: 12_000.0, r_cut: 0.0 },
        ..Default::default()
    };
    let model = match fit_sc_model(&ds, "pm25", &opts) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(format!("fit failed: {e}")),
    };
    let cm = &model.clusters;
    let pts = GridSpec::Regular { bbox: BBox::new(76.92, 28.42, 77.28, 28.76).unwrap(), nx: 30, ny: 30 }.points();
    let (mut mismatches, mut overlaps, mut missing_pv) = (0, 0, 0);
    for &p in &pts {
        let ns = match neighbor_set(p, &model) {
            Ok(ns) => ns,
            Err(_) => {
                missing_pv += 1;
                continue;
            }
        };
        if ns.presence.bits.len() != cm.k {
            missing_pv += 1;
        }
        // Oracle: every station whose cluster disc contains p, once.
        let covering: Vec<usize> = (0..cm.k).filter(|&l| haversine_m(p, cm.centers[l]) <= cm.hd_cut).map(|l| l + 1).collect();
        let expected: BTreeSet<usize> = if covering.is_empty() {
            let near = (0..cm.k).min_by(|&a, &b| haversine_m(p, cm.centers[a]).total_cmp(&haversine_m(p, cm.centers[b]))).unwrap() + 1;
            (0..cm.station_ids.len()).filter(|&i| cm.assignments[i] == near).collect()
        } else {
            covering.iter().flat_map(|&l| (0..cm.station_ids.len()).filter(move |&i| cm.assignments[i] == l)).collect()
        };
        if covering.len() > 1 {
            overlaps += 1;
        }
        if ns.union != expected.into_iter().collect::<Vec<_>>() {
            mismatches += 1;
        }
    }
    let labelled: Vec<(String, (f64, f64))> = pts.iter().enumerate().map(|(i, &p)| (format!("g{i}"), p)).collect();
    let rs = regions(cm, cm.hd_cut, &labelled);
    let mut seen = BTreeSet::new();
    let mut disjoint = true;
    for r in &rs.regions {
        for m in &r.members {
            disjoint &= seen.insert(m.clone());
        }
    }
    let ids: BTreeSet<String> = rs.regions.iter().map(|r| r.id.id()).collect();
    let m = rs.regions.len();
    let covered_all = seen.len() + rs.uncovered.len() == pts.len();
    verdict(
        mismatches == 0 && missing_pv == 0 && overlaps > 0 && disjoint && ids.len() == m && m < (1 << cm.k) && covered_all,
        format!("{} points, {overlaps} in overlaps, union mismatches = {mismatches}, m = {m} (k = {}), disjoint = {disjoint}", pts.len(), cm.k),
    )
}

// ---------------------------------------------------------------- 8

fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64 / batches as f64).sqrt()
}

fn mh_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = Normal::new(1.3, 1.0).unwrap();
    let data: Vec<f64> = (0..20).map(|_| normal.sample(&mut rng)).collect();
    let tau2 = 4.0;
    let precision = data.len() as f64 + 1.0 / tau2;
    let analytic = data.iter().sum::<f64>() / precision;
    let target = |t: &[f64]| -0.5 * data.iter().map(|x| (x - t[0]).powi(2)).sum::<f64>() - 0.5 * t[0] * t[0] / tau2;
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let chain = metropolis_hastings(target, &[0.5], &[0.0], 60_000, 10_000, seed).unwrap();
        let xs: Vec<f64> = chain.draws.iter().map(|d| d[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        worst = worst.max((mean - analytic).abs() / batch_means_se(&xs, 50));
    }

    let pi: [f64; 3] = [0.2, 0.5, 0.3];
    let discrete = |t: &[f64]| if (0.0..3.0).contains(&t[0]) { pi[t[0] as usize].ln() } else { f64::NEG_INFINITY };
    let chain = metropolis_hastings(discrete, &[1.2], &[1.5], 1_000_000, 10_000, 81).unwrap();
    let mut counts = [0.0; 3];
    chain.draws.iter().for_each(|d| counts[d[0] as usize] += 1.0);
    let n = chain.draws.len() as f64;
    let tv = 0.5 * (0..3).map(|i| (counts[i] / n - pi[i]).abs()).sum::<f64>();
    verdict(worst < 3.0 && tv < 0.02, format!("max |mean - analytic|/MCSE = {worst:.2} over 10 seeds, 3-state TV = {tv:.4}"))
}

// ---------------------------------------------------------------- 9

/// Partial-pivot Gaussian elimination, kept independent of the library's LU.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        x[r] = (b[r] - (r + 1..n).map(|c| a[r][c] * x[c]).sum::<f64>()) / a[r][r];
    }
    x
}

fn kriging_baseline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut exact, mut wsum, mut dense) = (0.0f64, 0.0f64, 0.0f64);
    for cfg in 0..20 {
        let family = [VariogramFamily::Exponential, VariogramFamily::Spherical, VariogramFamily::Gaussian, VariogramFamily::Matern][cfg % 4];
        let nugget = if cfg % 2 == 0 { 0.0 } else { 0.2 };
        let model = VariogramModel::new(family, nugget, rng.random_range(0.5..2.0), rng.random_range(3_000.0..20_000.0), 1.5).unwrap();
        let st: Vec<((f64, f64), f64)> = (0..5)
            .map(|_| ((rng.random_range(76.9..77.3), rng.random_range(28.45..28.85)), rng.random_range(20.0..200.0)))
            .collect();
        let sys = KrigingSystem::new(&st, &model).unwrap();
        for &(p, v) in &st {
            let r = sys.predict(p).unwrap();
            exact = exact.max((r.value - v).abs());
            wsum = wsum.max((r.weights.iter().sum::<f64>() - 1.0).abs());
        }
        let q = (rng.random_range(76.9..77.3), rng.random_range(28.45..28.85));
        let r = sys.predict(q).unwrap();
        wsum = wsum.max((r.weights.iter().sum::<f64>() - 1.0).abs());
        let cov = |a: (f64, f64), b: (f64, f64)| model.covariance(haversine_m(a, b));
        let mut a = vec![vec![0.0; 6]; 6];
        let mut b = vec![0.0; 6];
        for i in 0..5 {
            for j in 0..5 {
                a[i][j] = cov(st[i].0, st[j].0);
            }
            a[i][5] = 1.0;
            a[5][i] = 1.0;
            b[i] = cov(st[i].0, q);
        }
        b[5] = 1.0;
        let x = dense_solve(a, b);
        for i in 0..5 {
            dense = dense.max((x[i] - r.weights[i]).abs());
        }
    }
    verdict(
        exact < 1e-8 && wsum < 1e-10 && dense < 1e-8,
        format!("max station error = {exact:.1e}, max |Σw - 1| = {wsum:.1e}, max |w - dense| = {dense:.1e}"),
    )
}

// ---------------------------------------------------------------- 10

fn end_to_end() -> Outcome {
    let methods = [
        CvMethod::Sc(PredictionMode::MixtureArgmax),
        CvMethod::Sc(PredictionMode::WeightedMode),
        CvMethod::Sbvc,
        CvMethod::Ok,
        CvMethod::Idw,
    ];
    let grid = GridSpec::Regular { bbox: BBox::new(76.84, 28.40, 77.35, 28.88).unwrap(), nx: 64, ny: 64 };
    let opts = CvOptions { sbvc: SBVCConfig::default(), ..Default::default() };
    let mut table: Vec<Vec<(f64, f64)>> = vec![Vec::new(); methods.len()];
    let mut sc_wins = 0;
    let mut problems = Vec::new();
    println!("      seed  {}", methods.iter().map(|m| format!("{:>22}", m.tag())).collect::<String>());
    for seed in 0..20u64 {
        let cfg = SimConfig { seed, grid: grid.clone(), ..Default::default() };
        let field = match simulate_field(&cfg) {
            Ok(f) => f,
            Err(e) => return Outcome::Fail(format!("seed {seed}: simulation failed: {e}")),
        };
        let reports = match kfold_cv_many(&field.dataset, &cfg.variable, &methods, 10, seed, &opts) {
            Ok(r) => r,
            Err(e) => return Outcome::Fail(format!("seed {seed}: {e}")),
        };
        let mut row = format!("      {seed:>4}  ");
        for (i, r) in reports.iter().enumerate() {
            table[i].push((r.mae, r.rmse));
            row += &format!("{:>22}", format!("{:.2}/{:.2}", r.mae, r.rmse));
            if !r.mae.is_finite() || !r.rmse.is_finite() {
                problems.push(format!("seed {seed} {}: non-finite error", r.method));
            } else if r.rmse < r.mae {
                problems.push(format!("seed {seed} {}: RMSE < MAE", r.method));
            }
        }
        println!("{row}");
        if reports[0].mae < reports[4].mae {
            sc_wins += 1;
        }
    }
    println!("      mean  {}", table.iter().map(|c| {
        let n = c.len() as f64;
        format!("{:>22}", format!("{:.2}/{:.2}", c.iter().map(|x| x.0).sum::<f64>() / n, c.iter().map(|x| x.1).sum::<f64>() / n))
    }).collect::<String>());
    let mean_mae = |i: usize| table[i].iter().map(|x| x.0).sum::<f64>() / table[i].len() as f64;
    println!(
        "      ordering SC < SBVC < OK by mean MAE (reported only): {}",
        mean_mae(0) < mean_mae(2) && mean_mae(2) < mean_mae(3)
    );
    verdict(
        problems.is_empty() && sc_wins >= 12,
        format!("SC (mixture-argmax) beats IDW in {sc_wins}/20 seeds; {}", if problems.is_empty() { "all errors finite, RMSE ≥ MAE".to_string() } else { problems.join(", ") }),
    )
}

// ---------------------------------------------------------------- 11

fn delhi_reproduction() -> Outcome {
    use scopula::marginals::{select_marginal, Family};
    use scopula::spatial::hierarchical_cluster;

    let Ok(path) = std::env::var("SCOPULA_CPCB_CSV") else {
        return Outcome::Skip("SCOPULA_CPCB_CSV not set; Delhi export unavailable".into());
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return Outcome::Skip(format!("cannot read {path}: {e}")),
    };
    let ds = match scopula::data::parse_station_table(&text) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("ingestion failed: {e}")),
    };
    let find = |keys: &[&str]| {
        ds.variables.iter().position(|v| {
            let v = v.to_ascii_lowercase().replace(['.', '_', ' '], "");
            keys.iter().any(|k| v == *k)
        })
    };
    let Some(pm) = find(&["pm25"]) else {
        return Outcome::Fail("no PM2.5 column".into());
    };
    let mut notes = Vec::new();
    let mut ok = true;

    let means: Vec<Option<f64>> = ds.station_means(pm).into_iter().map(|p| p.1).collect();
    let candidates = [Family::LogNormal, Family::Weibull, Family::Gamma, Family::Exponential];
    match select_marginal(&means, &candidates, &EmConfig::default()) {
        Ok(ranked) => {
            let best = &ranked[0];
            let hit = best.family() == Family::LogNormal
                && (best.aic - 322.296).abs() <= 0.001
                && (best.bic - 330.035).abs() <= 0.001
                && (best.ks - 0.0285).abs() <= 0.001;
            ok &= hit;
            notes.push(format!("marginal {:?} AIC {:.3} BIC {:.3} KS {:.4}", best.family(), best.aic, best.bic, best.ks));
        }
        Err(e) => {
            ok = false;
            notes.push(format!("marginal selection failed: {e}"));
        }
    }
    match fit_lognormal_em(&ds.pooled_values(pm), &EmConfig::default()) {
        Ok(fit) => {
            if let Marginal::LogNormal { mu, sigma } = fit.model.dist {
                ok &= (mu - 4.3765).abs() <= 0.001 && (sigma - 0.7702).abs() <= 0.001;
                notes.push(format!("EM µ {mu:.4} σ {sigma:.4}"));
            }
        }
        Err(e) => {
            ok = false;
            notes.push(format!("EM failed: {e}"));
        }
    }
    let cfg = ClusterConfig { hd_cut: 18_026.0, ..Default::default() };
    match hierarchical_cluster(&ds.stations, &cfg, None) {
        Ok(cm) => {
            ok &= cm.k == 4;
            notes.push(format!("{} clusters", cm.k));
            if let Some(wd) = find(&["wd", "winddirection"]) {
                let wd_means = ds.station_means(wd);
                let rows: Vec<(f64, String, String)> = ds
                    .station_means(pm)
                    .into_iter()
                    .zip(wd_means)
                    .filter_map(|((rec, y), (_, w))| {
                        let c = cm.cluster_of(&rec.station_id)?;
                        Some((y?, wind_sector(w?, 16).to_string(), c.to_string()))
                    })
                    .collect();
                let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
                let a: Vec<String> = rows.iter().map(|r| r.1.clone()).collect();
                let b: Vec<String> = rows.iter().map(|r| r.2.clone()).collect();
                let table = two_way_anova(&y, &a, &b, true).or_else(|_| two_way_anova(&y, &a, &b, false));
                match table {
                    Ok(t) => {
                        let f: Vec<String> = t.rows.iter().filter_map(|r| r.f.map(|f| format!("{} F {f:.3}", r.source))).collect();
                        notes.push(format!("ANOVA with 16 WD sectors (not the unreported original binning): {}", f.join(", ")));
                    }
                    Err(e) => notes.push(format!("ANOVA failed: {e}")),
                }
            }
        }
        Err(e) => {
            ok = false;
            notes.push(format!("clustering failed: {e}"));
        }
    }
    verdict(ok, notes.join("; "))
}

fn main() {
    type Criterion = (usize, &'static str, fn() -> Outcome, Option<u64>);
    let criteria: [Criterion; 11] = [
        (1, "em fixed point", em_fixed_point, Some(5)),
        (2, "von mises umvue monte carlo", vonmises_umvue, Some(30)),
        (3, "pair-copula calibration", copula_calibration, Some(60)),
        (4, "c-vine fidelity", vine_fidelity, Some(5)),
        (5, "clayton tail dependence", clayton_tails, Some(20)),
        (6, "weights and separation degree", weights_and_separation, None),
        (7, "region and neighbor structure", algorithm_structure, None),
        (8, "metropolis-hastings soundness", mh_soundness, Some(60)),
        (9, "ordinary kriging baseline", kriging_baseline, None),
        (10, "end-to-end synthetic comparison", end_to_end, Some(600)),
        (11, "delhi reproduction", delhi_reproduction, None),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let out = within_budget(out, took, budget.map(Duration::from_secs));
        let (tag, detail) = match out {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{id:>2}] {name} ({:.1} s): {detail}", took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
