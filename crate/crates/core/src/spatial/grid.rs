use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(lon_min, lat_min, lon_max, lat_max)` in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub lon_min: f64,
    pub lat_min: f64,
    pub lon_max: f64,
    pub lat_max: f64,
}

impl BBox {
    pub fn new(lon_min: f64, lat_min: f64, lon_max: f64, lat_max: f64) -> Result<BBox> {
        let b = BBox { lon_min, lat_min, lon_max, lat_max };
        if ![lon_min, lat_min, lon_max, lat_max].iter().all(|v| v.is_finite()) || lon_min >= lon_max || lat_min >= lat_max {
            return Err(Error::Config(format!("invalid bounding box {b:?}")));
        }
        if lat_min < -90.0 || lat_max > 90.0 {
            return Err(Error::Config("latitudes must lie in [-90, 90]".into()));
        }
        Ok(b)
    }

    /// Smallest box holding every point.
    pub fn around(points: &[(f64, f64)]) -> Option<BBox> {
        let first = points.first()?;
        let mut b = BBox { lon_min: first.0, lat_min: first.1, lon_max: first.0, lat_max: first.1 };
        for p in points {
            b.lon_min = b.lon_min.min(p.0);
            b.lon_max = b.lon_max.max(p.0);
            b.lat_min = b.lat_min.min(p.1);
            b.lat_max = b.lat_max.max(p.1);
        }
        Some(b)
    }

    pub fn intersects(&self, o: &BBox) -> bool {
        self.lon_min <= o.lon_max && o.lon_min <= self.lon_max && self.lat_min <= o.lat_max && o.lat_min <= self.lat_max
    }
}

/// Prediction locations: a regular lattice (row-major, south to north) or
/// seeded uniform draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Regular { bbox: BBox, nx: usize, ny: usize },
    Random { bbox: BBox, n: usize, seed: u64 },
}

impl GridSpec {
    pub fn bbox(&self) -> BBox {
        match self {
            GridSpec::Regular { bbox, .. } | GridSpec::Random { bbox, .. } => *bbox,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GridSpec::Regular { nx, ny, .. } => nx * ny,
            GridSpec::Random { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell centers for a regular grid.
    pub fn points(&self) -> Vec<(f64, f64)> {
        match *self {
            GridSpec::Regular { bbox, nx, ny } => {
                let dx = (bbox.lon_max - bbox.lon_min) / nx as f64;
                let dy = (bbox.lat_max - bbox.lat_min) / ny as f64;
                let mut out = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        out.push((bbox.lon_min + (i as f64 + 0.5) * dx, bbox.lat_min + (j as f64 + 0.5) * dy));
                    }
                }
                out
            }
            GridSpec::Random { bbox, n, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n)
                    .map(|_| (rng.random_range(bbox.lon_min..bbox.lon_max), rng.random_range(bbox.lat_min..bbox.lat_max)))
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_grid_is_row_major_cell_centers() {
        let g = GridSpec::Regular { bbox: BBox::new(0.0, 0.0, 2.0, 1.0).unwrap(), nx: 2, ny: 2 };
        assert_eq!(g.points(), vec![(0.5, 0.25), (1.5, 0.25), (0.5, 0.75), (1.5, 0.75)]);
    }

    #[test]
    fn random_grid_is_seeded() {
        let g = GridSpec::Random { bbox: BBox::new(77.0, 28.0, 77.5, 28.5).unwrap(), n: 10, seed: 3 };
        assert_eq!(g.points(), g.points());
        assert!(g.points().iter().all(|p| (77.0..77.5).contains(&p.0) && (28.0..28.5).contains(&p.1)));
    }

    #[test]
    fn inverted_box_is_rejected() {
        assert!(BBox::new(1.0, 0.0, 0.0, 1.0).is_err());
    }
}
