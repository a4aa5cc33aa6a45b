/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// `sin²(Δlat/2) + cos lat1 cos lat2 sin²(Δlon/2)` for `(lon, lat)` degrees.
pub(crate) fn haversine_a(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (lon1, lat1) = (p1.0.to_radians(), p1.1.to_radians());
    let (lon2, lat2) = (p2.0.to_radians(), p2.1.to_radians());
    let s1 = ((lat2 - lat1) / 2.0).sin();
    let s2 = ((lon2 - lon1) / 2.0).sin();
    (s1 * s1 + lat1.cos() * lat2.cos() * s2 * s2).clamp(0.0, 1.0)
}

/// Central angle in radians between two `(lon, lat)` points.
pub fn central_angle(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    2.0 * haversine_a(p1, p2).sqrt().asin()
}

/// Great-circle distance in meters between `(lon, lat)` degree pairs.
pub fn haversine_m(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    EARTH_RADIUS_M * central_angle(p1, p2)
}

/// Equirectangular projection around `origin`, in meters. Good to a few
/// parts per thousand over a city-sized area.
pub fn tangent_plane(origin: (f64, f64), p: (f64, f64)) -> (f64, f64) {
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let x = (p.0 - origin.0) * k * origin.1.to_radians().cos();
    let y = (p.1 - origin.1) * k;
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_half_circumference() {
        assert_eq!(haversine_m((77.2, 28.6), (77.2, 28.6)), 0.0);
        let d = haversine_m((0.0, 0.0), (180.0, 0.0));
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_M).abs() < 1e-6, "{d}");
    }

    #[test]
    fn tangent_plane_agrees_locally() {
        let o = (77.2, 28.6);
        let p = (77.25, 28.63);
        let (x, y) = tangent_plane(o, p);
        let d = haversine_m(o, p);
        assert!(((x * x + y * y).sqrt() - d).abs() / d < 1e-3);
    }
}
