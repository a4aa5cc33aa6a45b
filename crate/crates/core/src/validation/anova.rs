use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub source: String,
    pub df: usize,
    pub ss: f64,
    pub ms: f64,
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    /// Factor A, factor B, optional interaction, then residuals.
    pub rows: Vec<AnovaRow>,
    pub total_ss: f64,
    pub total_df: usize,
    /// No residual variation, so F ratios are undefined.
    pub degenerate: bool,
}

impl AnovaTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# source,df,ss,ms,f,p\nsource,df,ss,ms,f,p\n");
        let fmt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v}"));
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{},{}\n", r.source, r.df, r.ss, r.ms, fmt(r.f), fmt(r.p)));
        }
        out
    }
}

fn levels(labels: &[String]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for l in labels {
        let k = m.len();
        m.entry(l.as_str()).or_insert(k);
    }
    m
}

/// Residual sum of squares of a least-squares fit; also returns the rank.
fn rss(x: &DMatrix<f64>, y: &DVector<f64>) -> (f64, usize) {
    let svd = x.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max().max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = svd.solve(y, tol).expect("SVD was computed with U and V");
    ((y - x * beta).norm_squared(), rank)
}

fn design(n: usize, blocks: &[&[Vec<f64>]]) -> DMatrix<f64> {
    let cols: Vec<&Vec<f64>> = blocks.iter().flat_map(|b| b.iter()).collect();
    DMatrix::from_fn(n, cols.len() + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] })
}

fn dummies(idx: &[usize], n_levels: usize) -> Vec<Vec<f64>> {
    (1..n_levels).map(|l| idx.iter().map(|&i| (i == l) as u8 as f64).collect()).collect()
}

/// Two-way ANOVA with sequential (Type-I) sums of squares: A, then B given
/// A, then the interaction given both.
pub fn two_way_anova(values: &[f64], factor_a: &[String], factor_b: &[String], interaction: bool) -> Result<AnovaTable> {
    let n = values.len();
    if factor_a.len() != n || factor_b.len() != n {
        return Err(Error::domain("values and factor labels differ in length"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("ANOVA values must be finite"));
    }
    let (la, lb) = (levels(factor_a), levels(factor_b));
    if la.len() < 2 || lb.len() < 2 {
        return Err(Error::insufficient("each factor needs at least two levels"));
    }
    let ia: Vec<usize> = factor_a.iter().map(|l| la[l.as_str()]).collect();
    let ib: Vec<usize> = factor_b.iter().map(|l| lb[l.as_str()]).collect();
    let mut cells: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&a, &b) in ia.iter().zip(&ib) {
        *cells.entry((a, b)).or_insert(0) += 1;
    }
    if interaction && cells.len() < la.len() * lb.len() {
        return Err(Error::Config(format!(
            "{} of {} factor cells are empty; fit the model without interaction",
            la.len() * lb.len() - cells.len(),
            la.len() * lb.len()
        )));
    }
    let y = DVector::from_column_slice(values);
    let mean = values.iter().sum::<f64>() / n as f64;
    let total_ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();

    let da = dummies(&ia, la.len());
    let db = dummies(&ib, lb.len());
    let (rss_a, rank_a) = rss(&design(n, &[&da]), &y);
    let (rss_ab, rank_ab) = rss(&design(n, &[&da, &db]), &y);
    let mut terms = vec![("A", rank_a - 1, (total_ss - rss_a).max(0.0)), ("B", rank_ab - rank_a, (rss_a - rss_ab).max(0.0))];
    let (mut res_ss, mut res_rank) = (rss_ab, rank_ab);
    if interaction {
        let dab: Vec<Vec<f64>> = da
            .iter()
            .flat_map(|ca| db.iter().map(move |cb| ca.iter().zip(cb).map(|(x, y)| x * y).collect()))
            .collect();
        let (rss_full, rank_full) = rss(&design(n, &[&da, &db, &dab]), &y);
        terms.push(("A:B", rank_full - rank_ab, (rss_ab - rss_full).max(0.0)));
        res_ss = rss_full;
        res_rank = rank_full;
    }
    if n <= res_rank {
        return Err(Error::insufficient("no residual degrees of freedom"));
    }
    let res_df = n - res_rank;
    let res_ms = res_ss / res_df as f64;
    let degenerate = !(res_ms > 1e-14 * (1.0 + total_ss / n as f64));
    let mut rows: Vec<AnovaRow> = terms
        .into_iter()
        .map(|(name, df, ss)| {
            let ms = if df > 0 { ss / df as f64 } else { 0.0 };
            let (f, p) = if degenerate || df == 0 {
                (None, None)
            } else {
                let f = ms / res_ms;
                let p = FisherSnedecor::new(df as f64, res_df as f64).map(|d| d.sf(f)).ok();
                (Some(f), p)
            };
            AnovaRow { source: name.to_string(), df, ss, ms, f, p }
        })
        .collect();
    rows.push(AnovaRow { source: "Residuals".into(), df: res_df, ss: res_ss, ms: res_ms, f: None, p: None });
    Ok(AnovaTable { rows, total_ss, total_df: n - 1, degenerate })
}

/// Compass sector (0-based, sector 0 centered on north) of a direction in degrees.
pub fn wind_sector(degrees: f64, n_sectors: usize) -> usize {
    let w = 360.0 / n_sectors as f64;
    (((degrees.rem_euclid(360.0) + w / 2.0) / w) as usize) % n_sectors
}
