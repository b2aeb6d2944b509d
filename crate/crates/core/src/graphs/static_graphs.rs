//! Graphs fixed before training: thresholded Gaussian distance kernel,
//! nearest-neighbour connectivity and Pearson pattern similarity.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::adjacency::{Adjacency, GraphKind};
use crate::data::{StationMeta, WeatherSeriesDataset};
use crate::error::{Error, Result};
use crate::geo::{distance_matrix, DistanceMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma {
    /// Mean pairwise station distance.
    Auto,
    Km(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceGraphConfig {
    pub sigma: Sigma,
    pub epsilon: f64,
    #[serde(default)]
    pub mode: DistanceMode,
}

impl Default for DistanceGraphConfig {
    fn default() -> Self {
        Self {
            sigma: Sigma::Auto,
            epsilon: 0.1,
            mode: DistanceMode::GreatCircle,
        }
    }
}

/// Resolves `Sigma::Auto` to the mean off-diagonal distance; coincident
/// station sets fall back to 1 km.
pub fn resolve_sigma(stations: &[StationMeta], cfg: &DistanceGraphConfig) -> Result<f64> {
    match cfg.sigma {
        Sigma::Km(s) if s > 0.0 && s.is_finite() => Ok(s),
        Sigma::Km(s) => Err(Error::Config(format!("sigma must be positive, got {s}"))),
        Sigma::Auto => {
            let n = stations.len();
            if n < 2 {
                return Ok(1.0);
            }
            let d = distance_matrix(stations, cfg.mode);
            let mean = d.sum() / (n * (n - 1)) as f64;
            Ok(if mean > 0.0 { mean } else { 1.0 })
        }
    }
}

pub fn build_distance_graph(
    stations: &[StationMeta],
    cfg: &DistanceGraphConfig,
) -> Result<Adjacency> {
    if !(0.0..1.0).contains(&cfg.epsilon) {
        return Err(Error::Config(format!("epsilon must be in [0, 1), got {}", cfg.epsilon)));
    }
    let sigma = resolve_sigma(stations, cfg)?;
    let d = distance_matrix(stations, cfg.mode);
    let w = Array2::from_shape_fn(d.dim(), |(i, j)| {
        if i == j {
            return 0.0;
        }
        let k = (-(d[[i, j]] * d[[i, j]]) / (sigma * sigma)).exp();
        if k >= cfg.epsilon {
            k
        } else {
            0.0
        }
    });
    Adjacency::new(GraphKind::Distance, w)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraphConfig {
    pub n_adjacent: usize,
    #[serde(default)]
    pub mode: DistanceMode,
}

impl Default for NeighborGraphConfig {
    fn default() -> Self {
        Self {
            n_adjacent: 10,
            mode: DistanceMode::GreatCircle,
        }
    }
}

/// Row `i` marks the `n_adjacent` nearest other stations; equal distances
/// resolve to the lower station index. The matrix is generally asymmetric.
pub fn build_neighbor_graph(
    stations: &[StationMeta],
    cfg: &NeighborGraphConfig,
) -> Result<Adjacency> {
    let n = stations.len();
    if cfg.n_adjacent == 0 || cfg.n_adjacent >= n {
        return Err(Error::Config(format!(
            "n_adjacent must be in 1..{n} for {n} stations, got {}",
            cfg.n_adjacent
        )));
    }
    let d = distance_matrix(stations, cfg.mode);
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| d[[i, a]].total_cmp(&d[[i, b]]).then(a.cmp(&b)));
        for &j in &others[..cfg.n_adjacent] {
            w[[i, j]] = 1.0;
        }
    }
    Adjacency::new(GraphKind::Neighbor, w)
}

pub const DEFAULT_PATTERN_FACTORS: [&str; 3] = ["t", "hv2", "rh"];

#[derive(Clone, Debug, PartialEq)]
pub struct PatternGraphs {
    /// Element-wise mean of the per-factor matrices.
    pub mean: Adjacency,
    pub per_factor: Vec<(String, Adjacency)>,
}

/// Pearson correlation between station series of each requested factor,
/// zero on the diagonal. `train` must be the training split and fully
/// observed.
pub fn build_pattern_graph(train: &WeatherSeriesDataset, factors: &[&str]) -> Result<PatternGraphs> {
    if factors.is_empty() {
        return Err(Error::Config("pattern graph needs at least one factor".into()));
    }
    if !train.is_complete() {
        return Err(Error::Structural(
            "pattern graph requires gap-free training series; interpolate first".into(),
        ));
    }
    let n = train.n_stations();
    let mut per_factor = Vec::with_capacity(factors.len());
    for &name in factors {
        let f = train.factor_index(name)?;
        let series = train.values.index_axis(Axis(2), f);
        let centered: Vec<Vec<f64>> = series
            .rows()
            .into_iter()
            .map(|r| {
                let m = r.mean().unwrap_or(0.0);
                r.iter().map(|v| v - m).collect()
            })
            .collect();
        let norms: Vec<f64> = centered
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        for (i, &nrm) in norms.iter().enumerate() {
            if !(nrm > 0.0) {
                return Err(Error::ZeroVariance {
                    factor: name.to_string(),
                    station: Some(train.stations[i].station_id.clone()),
                });
            }
        }
        let mut w = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
                w[[i, j]] = r;
                w[[j, i]] = r;
            }
        }
        log::debug!("pattern graph for {name}: mean off-diagonal {:.4}", w.sum() / (n * n.saturating_sub(1)).max(1) as f64);
        per_factor.push((name.to_string(), Adjacency::new(GraphKind::Pattern, w)?));
    }
    let mut mean = Array2::zeros((n, n));
    for (_, a) in &per_factor {
        mean += &a.weights;
    }
    mean /= per_factor.len() as f64;
    Ok(PatternGraphs {
        mean: Adjacency::new(GraphKind::Pattern, mean)?,
        per_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(id: &str, lat: f64, lon: f64) -> StationMeta {
        StationMeta::new(id, lat, lon, 0.0).unwrap()
    }

    #[test]
    fn coincident_stations_have_unit_weight() {
        let s = vec![st("a", 30.0, 110.0), st("b", 30.0, 110.0)];
        let cfg = DistanceGraphConfig {
            sigma: Sigma::Km(50.0),
            ..Default::default()
        };
        let a = build_distance_graph(&s, &cfg).unwrap();
        assert_eq!(a.weights[[0, 1]], 1.0);
        assert_eq!(a.weights[[0, 0]], 0.0);
    }

    #[test]
    fn kernel_just_below_epsilon_is_cut() {
        let sigma = 100.0;
        let eps = 0.3;
        // exp(-d^2/sigma^2) = eps - 1e-6  =>  d = sigma * sqrt(-ln(eps - 1e-6))
        let d_km = sigma * (-(eps - 1e-6_f64).ln()).sqrt();
        let dlat = d_km / crate::geo::EARTH_RADIUS_KM * 180.0 / std::f64::consts::PI;
        let s = vec![st("a", 0.0, 0.0), st("b", dlat, 0.0)];
        let cfg = DistanceGraphConfig {
            sigma: Sigma::Km(sigma),
            epsilon: eps,
            ..Default::default()
        };
        assert_eq!(build_distance_graph(&s, &cfg).unwrap().weights[[0, 1]], 0.0);
        // A hair closer crosses the threshold.
        let s = vec![st("a", 0.0, 0.0), st("b", dlat * 0.999, 0.0)];
        assert!(build_distance_graph(&s, &cfg).unwrap().weights[[0, 1]] >= eps);
    }

    #[test]
    fn collinear_middle_station_is_everyones_neighbour() {
        let s = vec![st("w", 30.0, 100.0), st("m", 30.0, 101.0), st("e", 30.0, 102.5)];
        let a = build_neighbor_graph(
            &s,
            &NeighborGraphConfig {
                n_adjacent: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.weights[[0, 1]], 1.0);
        assert_eq!(a.weights[[2, 1]], 1.0);
        assert_eq!(a.weights[[1, 0]], 1.0);
        assert!(a.row_sums().iter().all(|&r| r == 1.0));
    }

    #[test]
    fn neighbor_count_must_be_below_station_count() {
        let s = vec![st("a", 0.0, 0.0), st("b", 1.0, 0.0)];
        let cfg = NeighborGraphConfig {
            n_adjacent: 2,
            ..Default::default()
        };
        assert!(matches!(build_neighbor_graph(&s, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn full_neighbourhood_is_complete_graph() {
        let s: Vec<_> = (0..5).map(|i| st(&format!("s{i}"), i as f64, 0.0)).collect();
        let a = build_neighbor_graph(
            &s,
            &NeighborGraphConfig {
                n_adjacent: 4,
                ..Default::default()
            },
        )
        .unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a.weights[[i, j]], if i == j { 0.0 } else { 1.0 });
            }
        }
    }
}
