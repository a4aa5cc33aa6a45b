use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cluster::ClusterModel;
use super::geo::haversine_m;

/// Cluster-disc membership bits of one location.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PresenceVector {
    pub bits: Vec<bool>,
}

impl PresenceVector {
    pub fn uncovered(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Bit string, cluster 1 first (e.g. `"0110"`).
    pub fn id(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// 1-based indices of the clusters covering the point.
    pub fn clusters(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i + 1).collect()
    }
}

/// Bit `l` is set when the point lies within `hd_cut` meters of center `l`.
pub fn presence_vector(point: (f64, f64), cm: &ClusterModel, hd_cut: f64) -> PresenceVector {
    PresenceVector { bits: cm.centers.iter().map(|&c| haversine_m(point, c) <= hd_cut).collect() }
}

/// Index (1-based) of the cluster with the nearest center.
pub fn nearest_cluster(point: (f64, f64), cm: &ClusterModel) -> usize {
    cm.centers
        .iter()
        .enumerate()
        .map(|(i, &c)| (i + 1, haversine_m(point, c)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(1, |p| p.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: PresenceVector,
    /// Labels of the points (or stations) falling in the region.
    pub members: Vec<String>,
    /// `(lon_min, lat_min, lon_max, lat_max)` of the members.
    pub bbox: (f64, f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub regions: Vec<Region>,
    /// Points outside every disc.
    pub uncovered: Vec<String>,
}

/// Group labelled points by presence pattern. Patterns are distinct by
/// construction, so regions are disjoint and number at most `2^k - 1`.
pub fn regions(cm: &ClusterModel, hd_cut: f64, points: &[(String, (f64, f64))]) -> RegionSet {
    let mut groups: BTreeMap<PresenceVector, Vec<(String, (f64, f64))>> = BTreeMap::new();
    let mut uncovered = Vec::new();
    for (label, p) in points {
        let pv = presence_vector(*p, cm, hd_cut);
        if pv.uncovered() {
            uncovered.push(label.clone());
        } else {
            groups.entry(pv).or_default().push((label.clone(), *p));
        }
    }
    let regions = groups
        .into_iter()
        .rev()
        .map(|(id, pts)| {
            let bbox = pts.iter().fold((f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY), |b, (_, p)| {
                (b.0.min(p.0), b.1.min(p.1), b.2.max(p.0), b.3.max(p.1))
            });
            Region { id, members: pts.into_iter().map(|p| p.0).collect(), bbox }
        })
        .collect();
    RegionSet { regions, uncovered }
}

/// Regions induced by the model's own stations.
pub fn station_regions(cm: &ClusterModel) -> RegionSet {
    let pts: Vec<(String, (f64, f64))> = cm.station_ids.iter().cloned().zip(cm.coords.iter().copied()).collect();
    regions(cm, cm.hd_cut, &pts)
}
