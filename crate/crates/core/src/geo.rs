use serde::{Deserialize, Serialize};

use crate::data::StationMeta;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance in kilometres.
pub fn haversine_km(a: &StationMeta, b: &StationMeta) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = p2 - p1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlambda / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_KM * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Straight-line distance in kilometres between the two points placed on a
/// sphere of radius `R + alt`.
pub fn euclidean_3d_km(a: &StationMeta, b: &StationMeta) -> f64 {
    let cart = |s: &StationMeta| {
        let r = EARTH_RADIUS_KM + s.alt / 1000.0;
        let (la, lo) = (s.lat.to_radians(), s.lon.to_radians());
        [r * la.cos() * lo.cos(), r * la.cos() * lo.sin(), r * la.sin()]
    };
    let (x, y) = (cart(a), cart(b));
    x.iter()
        .zip(&y)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    #[default]
    GreatCircle,
    Euclidean3d,
}

impl DistanceMode {
    pub fn distance(self, a: &StationMeta, b: &StationMeta) -> f64 {
        match self {
            DistanceMode::GreatCircle => haversine_km(a, b),
            DistanceMode::Euclidean3d => euclidean_3d_km(a, b),
        }
    }
}

/// Dense pairwise distance matrix, exactly symmetric.
pub fn distance_matrix(stations: &[StationMeta], mode: DistanceMode) -> ndarray::Array2<f64> {
    let n = stations.len();
    let mut d = ndarray::Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = mode.distance(&stations[i], &stations[j]);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(lat: f64, lon: f64) -> StationMeta {
        StationMeta::new("x", lat, lon, 0.0).unwrap()
    }

    #[test]
    fn identical_points_are_zero_apart() {
        assert_eq!(haversine_km(&st(39.9, 116.4), &st(39.9, 116.4)), 0.0);
    }

    #[test]
    fn antipodes_are_half_a_circumference_apart() {
        let d = haversine_km(&st(10.0, 20.0), &st(-10.0, -160.0));
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-3);
        assert!((d - 20015.1).abs() < 0.1);
    }

    #[test]
    fn beijing_shanghai_matches_spherical_law_of_cosines() {
        let (a, b) = (st(39.9, 116.4), st(31.2, 121.5));
        let (p1, p2, dl) = (
            a.lat.to_radians(),
            b.lat.to_radians(),
            (b.lon - a.lon).to_radians(),
        );
        let oracle = EARTH_RADIUS_KM * (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).acos();
        let d = haversine_km(&a, &b);
        assert!((d - oracle).abs() < 0.1, "{d} vs {oracle}");
        assert_eq!(d, haversine_km(&b, &a));
    }

    #[test]
    fn euclidean_chord_is_shorter_than_arc() {
        let (a, b) = (st(39.9, 116.4), st(31.2, 121.5));
        assert!(euclidean_3d_km(&a, &b) < haversine_km(&a, &b));
    }
}
