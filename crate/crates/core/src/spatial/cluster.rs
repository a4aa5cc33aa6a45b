//! Complete-linkage hierarchical clustering of stations under a distance cut
//! and a correlation cut, plus elbow selection of the cluster count.

use serde::{Deserialize, Serialize};

use crate::data::StationRecord;
use crate::error::{Error, Result};

use super::geo::{haversine_m, tangent_plane};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Target number of clusters; `None` cuts the tree at `hd_cut`.
    pub k: Option<usize>,
    /// Meters.
    pub hd_cut: f64,
    /// Station pairs whose ACF at their distance falls below this never merge.
    pub r_cut: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { k: None, hd_cut: 18_026.0, r_cut: 0.0 }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hd_cut > 0.0 && self.hd_cut.is_finite()) {
            return Err(Error::Config(format!("hd_cut must be positive and finite, got {}", self.hd_cut)));
        }
        if !(0.0..1.0).contains(&self.r_cut) {
            return Err(Error::Config(format!("r_cut must lie in [0, 1), got {}", self.r_cut)));
        }
        if self.k == Some(0) {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Node ids: `0..n` are stations (sorted by id), `n + i` is merge `i`.
    pub left: usize,
    pub right: usize,
    /// Complete-linkage height in meters.
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Station ids in ascending order; `assignments[i]` is the cluster
    /// (1-based) of `station_ids[i]`.
    pub station_ids: Vec<String>,
    pub coords: Vec<(f64, f64)>,
    pub assignments: Vec<usize>,
    pub k: usize,
    /// Arithmetic means of member `(lon, lat)`.
    pub centers: Vec<(f64, f64)>,
    pub dendrogram: Vec<Merge>,
    /// `(k, SSW)` for every cut reachable from the dendrogram.
    pub ssw_curve: Vec<(usize, f64)>,
    pub hd_cut: f64,
    pub warnings: Vec<String>,
}

impl ClusterModel {
    pub fn members(&self, cluster: usize) -> Vec<&str> {
        self.station_ids
            .iter()
            .zip(&self.assignments)
            .filter(|(_, &a)| a == cluster)
            .map(|(s, _)| s.as_str())
            .collect()
    }

    pub fn cluster_of(&self, station: &str) -> Option<usize> {
        self.station_ids.iter().position(|s| s == station).map(|i| self.assignments[i])
    }
}

/// Labels after applying the first `n_merges` merges, renumbered 1.. in
/// order of first appearance.
fn labels_after(n: usize, merges: &[Merge], n_merges: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n + merges.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, m) in merges.iter().take(n_merges).enumerate() {
        let (a, b) = (find(&mut parent, m.left), find(&mut parent, m.right));
        parent[a] = n + i;
        parent[b] = n + i;
    }
    let mut map = std::collections::HashMap::new();
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            let next = map.len() + 1;
            *map.entry(r).or_insert(next)
        })
        .collect()
}

fn centers_of(coords: &[(f64, f64)], labels: &[usize], k: usize) -> Vec<(f64, f64)> {
    let mut acc = vec![(0.0, 0.0, 0usize); k];
    for (c, &l) in coords.iter().zip(labels) {
        acc[l - 1].0 += c.0;
        acc[l - 1].1 += c.1;
        acc[l - 1].2 += 1;
    }
    acc.into_iter().map(|(x, y, n)| (x / n as f64, y / n as f64)).collect()
}

/// Within-cluster sum of squared distances to the centroid, measured in a
/// tangent plane (meters²) so that nested cuts can only lower it.
fn ssw(coords: &[(f64, f64)], labels: &[usize], k: usize) -> f64 {
    let origin = {
        let n = coords.len() as f64;
        (coords.iter().map(|c| c.0).sum::<f64>() / n, coords.iter().map(|c| c.1).sum::<f64>() / n)
    };
    let xy: Vec<(f64, f64)> = coords.iter().map(|&c| tangent_plane(origin, c)).collect();
    let cen = centers_of(&xy, labels, k);
    xy.iter()
        .zip(labels)
        .map(|(p, &l)| {
            let c = cen[l - 1];
            (p.0 - c.0).powi(2) + (p.1 - c.1).powi(2)
        })
        .sum()
}

/// Complete linkage on haversine distances. Pairs with `acf(d) < r_cut` get
/// infinite dissimilarity and therefore never share a cluster.
pub fn hierarchical_cluster(
    stations: &[StationRecord],
    cfg: &ClusterConfig,
    acf: Option<&dyn Fn(f64) -> f64>,
) -> Result<ClusterModel> {
    cfg.validate()?;
    let mut st: Vec<&StationRecord> = stations.iter().collect();
    st.sort_by(|a, b| a.station_id.cmp(&b.station_id));
    let n = st.len();
    if n == 0 {
        return Err(Error::insufficient("clustering needs at least one station"));
    }
    if let Some(k) = cfg.k {
        if n < k {
            return Err(Error::insufficient(format!("{n} stations cannot form {k} clusters")));
        }
    }
    let coords: Vec<(f64, f64)> = st.iter().map(|s| s.coords()).collect();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = haversine_m(coords[i], coords[j]);
            let blocked = acf.is_some_and(|f| f(d) < cfg.r_cut);
            let v = if blocked { f64::INFINITY } else { d };
            dist[i][j] = v;
            dist[j][i] = v;
        }
    }

    // active clusters: (node id, smallest member index)
    let mut active: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    let mut sizes = vec![1usize; n];
    let mut merges = Vec::new();
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let d = dist[a][b];
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => {
                        d < bd || (d == bd && (active[a].1, active[b].1) < (active[ba].1, active[bb].1))
                    }
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (h, a, b) = best.unwrap();
        if !h.is_finite() {
            break;
        }
        merges.push(Merge { left: active[a].0, right: active[b].0, height: h, size: sizes[a] + sizes[b] });
        // Lance-Williams update for complete linkage: max of the two rows
        for c in 0..active.len() {
            let m = dist[a][c].max(dist[b][c]);
            dist[a][c] = m;
            dist[c][a] = m;
        }
        dist[a][a] = 0.0;
        active[a] = (n + merges.len() - 1, active[a].1.min(active[b].1));
        sizes[a] += sizes[b];
        active.remove(b);
        sizes.remove(b);
        dist.remove(b);
        for row in dist.iter_mut() {
            row.remove(b);
        }
    }

    let mut warnings = Vec::new();
    let min_k = n - merges.len();
    let n_merges = match cfg.k {
        Some(k) => {
            if k < min_k {
                warnings.push(format!(
                    "correlation cut leaves {min_k} disconnected groups; cannot reach k = {k}"
                ));
            }
            n - k.max(min_k)
        }
        None => merges.iter().take_while(|m| m.height <= cfg.hd_cut).count(),
    };
    let labels = labels_after(n, &merges, n_merges);
    let k = n - n_merges;
    let singletons = (1..=k).filter(|&c| labels.iter().filter(|&&l| l == c).count() == 1).count();
    if n > 1 && singletons * 2 > n {
        warnings.push(format!("{singletons} of {n} stations are singleton clusters"));
    }
    let ssw_curve = (0..=merges.len())
        .rev()
        .map(|m| {
            let kk = n - m;
            (kk, ssw(&coords, &labels_after(n, &merges, m), kk))
        })
        .collect();
    Ok(ClusterModel {
        station_ids: st.iter().map(|s| s.station_id.clone()).collect(),
        centers: centers_of(&coords, &labels, k),
        coords,
        assignments: labels,
        k,
        dendrogram: merges,
        ssw_curve,
        hd_cut: cfg.hd_cut,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowChoice {
    pub k: usize,
    /// The curve has no discernible bend.
    pub no_elbow: bool,
}

/// `k` maximising the discrete second difference of SSW; ties go to the
/// smaller `k`.
pub fn choose_k_elbow(ssw_curve: &[(usize, f64)]) -> Result<ElbowChoice> {
    if ssw_curve.len() < 3 {
        return Err(Error::insufficient("elbow selection needs at least 3 points"));
    }
    let mut c = ssw_curve.to_vec();
    c.sort_by_key(|p| p.0);
    let scale = c.iter().map(|p| p.1.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut best = (f64::NEG_INFINITY, c[1].0);
    for i in 1..c.len() - 1 {
        let d2 = c[i - 1].1 - 2.0 * c[i].1 + c[i + 1].1;
        if d2 > best.0 {
            best = (d2, c[i].0);
        }
    }
    Ok(ElbowChoice { k: best.1, no_elbow: best.0 <= 1e-9 * scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, lon: f64, lat: f64) -> StationRecord {
        StationRecord { station_id: id.into(), lon, lat }
    }

    #[test]
    fn two_separated_groups() {
        // ~1 km apart within a group, ~100 km between groups
        let st = vec![
            rec("a", 77.00, 28.50),
            rec("b", 77.01, 28.50),
            rec("c", 77.00, 28.51),
            rec("d", 78.00, 28.50),
            rec("e", 78.01, 28.50),
        ];
        let cfg = ClusterConfig { k: None, hd_cut: 10_000.0, r_cut: 0.0 };
        let m = hierarchical_cluster(&st, &cfg, None).unwrap();
        assert_eq!(m.k, 2);
        assert_eq!(m.assignments, vec![1, 1, 1, 2, 2]);
        for w in m.dendrogram.windows(2) {
            assert!(w[0].height <= w[1].height);
        }
    }

    #[test]
    fn tiny_cut_gives_singletons() {
        let st = vec![rec("a", 77.0, 28.5), rec("b", 77.1, 28.5), rec("c", 77.2, 28.5)];
        let cfg = ClusterConfig { k: None, hd_cut: 1.0, r_cut: 0.0 };
        let m = hierarchical_cluster(&st, &cfg, None).unwrap();
        assert_eq!(m.k, 3);
        assert!(!m.warnings.is_empty());
    }

    #[test]
    fn correlation_cut_blocks_merges() {
        let st = vec![rec("a", 77.0, 28.5), rec("b", 77.05, 28.5)];
        let cfg = ClusterConfig { k: None, hd_cut: 1e7, r_cut: 0.5 };
        let acf = |_d: f64| 0.1;
        let m = hierarchical_cluster(&st, &cfg, Some(&acf)).unwrap();
        assert_eq!(m.k, 2);
    }

    #[test]
    fn elbow_examples() {
        let c = [(1, 100.0), (2, 20.0), (3, 18.0), (4, 17.0)];
        assert_eq!(choose_k_elbow(&c).unwrap(), ElbowChoice { k: 2, no_elbow: false });
        let lin = [(1, 40.0), (2, 30.0), (3, 20.0), (4, 10.0)];
        assert!(choose_k_elbow(&lin).unwrap().no_elbow);
    }
}
