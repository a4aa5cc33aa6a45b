use scopula::data::{Observation, StationDataset, StationRecord};
use scopula::marginals::Marginal;
use scopula::numeric::{linspace, trapezoid};
use scopula::sc::*;
use scopula::spatial::{ClusterConfig, VariogramFamily, VariogramModel};

fn lognormal() -> Marginal {
    Marginal::LogNormal { mu: 4.3765, sigma: 0.7702 }
}

fn coord_margins() -> CoordMargins {
    CoordMargins { lon: Marginal::Uniform { lo: 76.8, hi: 77.4 }, lat: Marginal::Uniform { lo: 28.4, hi: 28.9 } }
}

fn grid() -> YGrid {
    YGrid::from_marginal(&lognormal(), &SCConfig::default()).unwrap()
}

fn gaussian_station(id: &str, coords: (f64, f64), g: YGrid, mean: f64, sd: f64) -> StationConditional {
    let ys = g.values();
    let mut density: Vec<f64> = ys.iter().map(|y| (-0.5 * ((y - mean) / sd).powi(2)).exp()).collect();
    let mass = trapezoid(&ys, &density);
    density.iter_mut().for_each(|d| *d /= mass);
    let cdf = scopula::numeric::cumulative_trapezoid(&ys, &density);
    let mode = ys[density.iter().enumerate().fold(0, |b, (i, &d)| if d > density[b] { i } else { b })];
    StationConditional { station_id: id.into(), coords, grid: g, density, cdf, mode, mass: 1.0 }
}

#[test]
fn independence_joint_returns_the_marginal() {
    let j = JointCopula::independence();
    let g = grid();
    let sc = station_conditional(&j, &coord_margins(), &lognormal(), "a", (77.1, 28.6), &g).unwrap();
    let ys = g.values();
    for (k, y) in ys.iter().enumerate().step_by(97) {
        let f = lognormal().pdf(*y) / sc.mass;
        assert!((sc.density[k] - f).abs() < 1e-12 * (1.0 + f));
    }
}

#[test]
fn conditional_density_integrates_to_one_and_cdf_is_monotone() {
    let j = JointCopula::clayton(1.2).unwrap();
    let g = grid();
    let sc = station_conditional(&j, &coord_margins(), &lognormal(), "a", (77.0, 28.8), &g).unwrap();
    assert!((trapezoid(&g.values(), &sc.density) - 1.0).abs() < 0.02);
    assert!(sc.mass > 0.98 && sc.mass < 1.001);
    assert!(sc.cdf.windows(2).all(|w| w[1] >= w[0]));
    let end = *sc.cdf.last().unwrap();
    assert!((0.99..=1.001).contains(&end));
    assert!(sc.density.iter().all(|&d| d >= 0.0));
}

#[test]
fn clayton_density_matches_finite_difference_of_the_cdf() {
    let theta = 0.01697;
    let cm = coord_margins();
    let m = lognormal();
    let j = JointCopula::clayton(theta).unwrap();
    let cdf = |u: [f64; 3]| (u.iter().map(|x| x.powf(-theta)).sum::<f64>() - 2.0).powf(-1.0 / theta);
    let (x1, x2) = (77.05, 28.62);
    let (u1, u2) = cm.transform((x1, x2));
    let h = 1e-3;
    let mixed2 = |a: f64, b: f64, c: f64| {
        (cdf([a + h, b + h, c]) - cdf([a + h, b - h, c]) - cdf([a - h, b + h, c]) + cdf([a - h, b - h, c])) / (4.0 * h * h)
    };
    let c2 = mixed2(u1, u2, 1.0 - 1e-12);
    for &y in &[40.0, 80.0, 150.0, 300.0] {
        let u3 = m.cdf(y);
        let c3 = (mixed2(u1, u2, u3 + h) - mixed2(u1, u2, u3 - h)) / (2.0 * h);
        let fd = c3 / c2 * m.pdf(y);
        let exact = conditional_density_at(&j, &cm, &m, (x1, x2), y).unwrap();
        assert!((fd - exact).abs() < 1e-4, "y={y}: {fd} vs {exact}");
    }
}

#[test]
fn separation_of_identical_inputs_is_epsilon_plus_one() {
    let cfg = SCConfig::default();
    let j = JointCopula::clayton(0.5).unwrap();
    let g = grid();
    let a = station_conditional(&j, &coord_margins(), &lognormal(), "a", (77.1, 28.6), &g).unwrap();
    assert_eq!(separation_degree(&a, &a, &lognormal(), &cfg).unwrap(), cfg.epsilon + 1.0);
    assert_eq!(cfg.epsilon + 1.0, 1.4224);
}

#[test]
fn separation_is_bounded_and_symmetric() {
    let cfg = SCConfig::default();
    let g = grid();
    let a = gaussian_station("a", (77.0, 28.5), g, 60.0, 10.0);
    let b = gaussian_station("b", (77.3, 28.8), g, 140.0, 30.0);
    let dab = separation_degree(&a, &b, &lognormal(), &cfg).unwrap();
    let dba = separation_degree(&b, &a, &lognormal(), &cfg).unwrap();
    assert_eq!(dab, dba);
    assert!(dab >= cfg.epsilon && dab <= cfg.epsilon + 1.0);
}

#[test]
fn far_apart_identical_densities_approach_epsilon() {
    let cfg = SCConfig::default();
    let g = grid();
    let a = gaussian_station("a", (0.0, 0.0), g, 60.0, 10.0);
    let b = gaussian_station("b", (180.0, 0.0), g, 60.0, 10.0);
    let d = separation_degree(&a, &b, &lognormal(), &cfg).unwrap();
    assert!((d - cfg.epsilon - (-std::f64::consts::FRAC_PI_2).exp()).abs() < 1e-12);
    assert!(d < cfg.epsilon + 0.21);
}

#[test]
fn lp_distance_of_step_functions_matches_riemann_sum() {
    let u = linspace(0.0, 1.0, 2001);
    let fa: Vec<f64> = u.iter().map(|&x| if x < 0.5 { 2.0 } else { 0.0 }).collect();
    let fb: Vec<f64> = u.iter().map(|&x| if x < 0.25 { 1.0 } else { 0.5 }).collect();
    let got = lp_distance_tabulated(&fa, &fb, &u, 2);
    let mut s = 0.0;
    for k in 0..u.len() - 1 {
        let h = u[k + 1] - u[k];
        s += 0.5 * h * ((fa[k] - fb[k]).powi(2) + (fa[k + 1] - fb[k + 1]).powi(2));
    }
    assert!((got - s.sqrt()).abs() < 1e-10);
}

#[test]
fn mismatched_grids_are_rejected() {
    let cfg = SCConfig::default();
    let a = gaussian_station("a", (77.0, 28.5), grid(), 60.0, 10.0);
    let b = gaussian_station("b", (77.0, 28.5), YGrid::new(1.0, 500.0, 1024).unwrap(), 60.0, 10.0);
    assert!(separation_degree(&a, &b, &lognormal(), &cfg).is_err());
}

#[test]
fn weight_rules() {
    let one = normalize_weights(vec![("a".into(), 1.3, 0.7)]).unwrap();
    assert_eq!(one.entries[0].alpha, 1.0);
    let two = normalize_weights(vec![("a".into(), 1.1, 0.6), ("b".into(), 1.1, 0.6)]).unwrap();
    assert_eq!(two.entries[0].alpha, 0.5);
    assert!(normalize_weights(vec![]).is_err());
}

#[test]
fn both_modes_agree_for_one_or_identical_stations() {
    let g = grid();
    let a = gaussian_station("a", (77.0, 28.5), g, 80.0, 12.0);
    let b = gaussian_station("b", (77.2, 28.6), g, 80.0, 12.0);
    let w1 = normalize_weights(vec![("a".into(), 1.0, 1.0)]).unwrap();
    assert_eq!(combine(&[&a], &w1), (a.mode, a.mode));
    let w2 = normalize_weights(vec![("a".into(), 1.0, 0.9), ("b".into(), 1.2, 0.4)]).unwrap();
    let (mix, lit) = combine(&[&a, &b], &w2);
    assert_eq!(mix, a.mode);
    assert!((lit - a.mode).abs() < 1e-9);
}

#[test]
fn modes_ten_and_twenty() {
    let g = YGrid::new(0.0, 40.0, 4001).unwrap();
    let a = gaussian_station("a", (77.0, 28.5), g, 10.0, 2.0);
    let b = gaussian_station("b", (77.2, 28.6), g, 20.0, 4.0);
    let w = normalize_weights(vec![("a".into(), 1.0, 0.5), ("b".into(), 1.0, 0.5)]).unwrap();
    let (mix, lit) = combine(&[&a, &b], &w);
    assert!((lit - 15.0).abs() < 1e-9);
    let pdf = |y: f64, m: f64, s: f64| (-0.5 * ((y - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let dense = linspace(0.0, 40.0, 100_001);
    let best = dense
        .iter()
        .copied()
        .max_by(|x, y| (0.5 * pdf(*x, 10.0, 2.0) + 0.5 * pdf(*x, 20.0, 4.0)).total_cmp(&(0.5 * pdf(*y, 10.0, 2.0) + 0.5 * pdf(*y, 20.0, 4.0))))
        .unwrap();
    assert!((mix - best).abs() <= g.step());
}

#[test]
fn clayton_conditional_cdf_properties() {
    let cm = coord_margins();
    let m = lognormal();
    let top = m.quantile(0.999);
    assert!(clayton_conditional_cdf(2.0, 77.1, 28.7, top, &cm, &m).unwrap() >= 0.99);
    for &y in &[30.0, 80.0, 200.0] {
        let f = clayton_conditional_cdf(1e-4, 77.1, 28.7, y, &cm, &m).unwrap();
        assert!((f - m.cdf(y)).abs() < 1e-3);
    }
    let med = m.quantile(0.5);
    let f = clayton_conditional_cdf(0.01697, 77.1, 28.7, med, &cm, &m).unwrap();
    assert!((0.45..=0.55).contains(&f), "{f}");
    let (u1, u2) = cm.transform((77.1, 28.7));
    let closed = clayton_conditional_cdf_closed(0.8, u1, u2, m.cdf(120.0));
    assert!((clayton_conditional_cdf(0.8, 77.1, 28.7, 120.0, &cm, &m).unwrap() - closed).abs() < 1e-8);
    let mut prev = 0.0;
    for y in linspace(5.0, 500.0, 40) {
        let f = clayton_conditional_cdf(0.8, 77.1, 28.7, y, &cm, &m).unwrap();
        assert!(f >= prev - 1e-12);
        prev = f;
    }
}

fn dataset(stations: &[(&str, f64, f64, f64)], days: usize) -> StationDataset {
    let d0 = chrono::NaiveDate::from_ymd_opt(2020, 11, 1).unwrap();
    let mut series = std::collections::BTreeMap::new();
    let mut recs = Vec::new();
    for (k, &(id, lon, lat, level)) in stations.iter().enumerate() {
        recs.push(StationRecord { station_id: id.into(), lon, lat });
        let obs = (0..days)
            .map(|d| {
                let wobble = 1.0 + 0.3 * (((d * 7 + k * 3) % 11) as f64 / 10.0 - 0.5);
                Observation { date: d0 + chrono::Days::new(d as u64), values: vec![Some(level * wobble)] }
            })
            .collect();
        series.insert(id.to_string(), obs);
    }
    StationDataset { stations: recs, series, variables: vec!["pm25".into()] }
}

fn opts() -> SCFitOptions {
    SCFitOptions {
        variogram: Some(VariogramModel::new(VariogramFamily::Exponential, 0.0, 1.0, 10_000.0, 0.5).unwrap()),
        cluster: ClusterConfig { k: Some(3), ..Default::default() },
        ..Default::default()
    }
}

fn three_cluster_dataset() -> StationDataset {
    dataset(
        &[
            ("A1", 77.00, 28.50, 60.0),
            ("A2", 77.01, 28.51, 70.0),
            ("B1", 77.20, 28.50, 120.0),
            ("B2", 77.21, 28.51, 110.0),
            ("C1", 77.10, 28.65, 90.0),
            ("C2", 77.11, 28.66, 95.0),
        ],
        20,
    )
}

#[test]
fn overlap_points_use_the_deduplicated_union() {
    let mut o = opts();
    o.cluster.hd_cut = 15_000.0;
    let model = fit_sc_model(&three_cluster_dataset(), "pm25", &o).unwrap();
    let p = (77.10, 28.50);
    let ns = neighbor_set(p, &model).unwrap();
    let assign = &model.clusters.assignments;
    let members: std::collections::BTreeSet<usize> =
        ns.presence.clusters().iter().flat_map(|&c| (0..assign.len()).filter(move |&i| assign[i] == c)).collect();
    assert!(ns.presence.clusters().len() >= 2);
    assert_eq!(ns.union, members.into_iter().collect::<Vec<_>>());
    assert!(ns.selected.len() <= model.cfg.n_neighbors);
}

#[test]
fn weighted_mode_grid_stays_in_hull_of_modes() {
    let mut o = opts();
    o.sc.mode = PredictionMode::WeightedMode;
    let model = fit_sc_model(&three_cluster_dataset(), "pm25", &o).unwrap();
    let lo = model.stations.iter().map(|s| s.mode).fold(f64::INFINITY, f64::min);
    let hi = model.stations.iter().map(|s| s.mode).fold(f64::NEG_INFINITY, f64::max);
    let pts = scopula::spatial::GridSpec::Regular { bbox: scopula::spatial::BBox::new(76.95, 28.45, 77.25, 28.70).unwrap(), nx: 20, ny: 20 }.points();
    let g = interpolate_grid_sc(&model, &pts);
    assert_eq!(g.points.len(), 400);
    assert_eq!(g.n_failed(), 0);
    for p in &g.points {
        let pred = p.prediction.as_ref().unwrap();
        assert!(pred.value >= lo - 1e-9 && pred.value <= hi + 1e-9);
        assert!((pred.weights.sum() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn single_station_cluster_gives_its_mode() {
    let ds = dataset(&[("A", 77.0, 28.5, 60.0), ("B", 77.5, 28.9, 150.0)], 20);
    let mut o = opts();
    o.cluster.k = None;
    let model = fit_sc_model(&ds, "pm25", &o).unwrap();
    assert_eq!(model.clusters.k, 2);
    for p in [(77.0, 28.5), (77.01, 28.51), (76.99, 28.49)] {
        let pred = predict_sc(p, &model).unwrap();
        assert_eq!(pred.mixture_argmax, model.stations[0].mode);
        assert_eq!(pred.weighted_mode, model.stations[0].mode);
    }
}

#[test]
fn uncovered_points_follow_the_fallback_switch() {
    let mut o = opts();
    o.cluster.hd_cut = 3_000.0;
    o.cluster.k = None;
    let model = fit_sc_model(&three_cluster_dataset(), "pm25", &o).unwrap();
    let far = (77.6, 28.9);
    assert_eq!(predict_sc(far, &model).unwrap().region_id, UNCOVERED);
    let mut strict = model.clone();
    strict.cfg.uncovered_fallback = false;
    assert!(predict_sc(far, &strict).is_err());
}
