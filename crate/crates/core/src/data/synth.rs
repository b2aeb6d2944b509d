//! Desk-scale synthetic station network.
//!
//! Each factor is `baseline + diurnal + seasonal + correlated + white`, where
//! the correlated term is a stationary AR(1) process in time whose
//! cross-station covariance is `exp(-d / scale)` in great-circle distance.

use std::f64::consts::PI;

use chrono::{NaiveDate, NaiveDateTime};
use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{StationMeta, WeatherSeriesDataset};
use crate::error::{Error, Result};
use crate::geo::{distance_matrix, DistanceMode};

/// Generation order of factors: the pattern-graph trio first.
pub const SYNTH_FACTOR_ORDER: [(&str, f64, f64, f64); 20] = [
    // (name, mean, scale, diurnal sign)
    ("t", 12.0, 6.0, 1.0),
    ("rh", 65.0, 12.0, -1.0),
    ("hv2", 20000.0, 6000.0, 0.5),
    ("ap", 950.0, 5.0, -0.3),
    ("wvp", 12.0, 3.0, 0.4),
    ("dt", 5.0, 5.0, 0.2),
    ("st", 15.0, 8.0, 1.2),
    ("mxt", 13.0, 6.0, 1.0),
    ("mnt", 11.0, 6.0, 1.0),
    ("ws", 3.0, 1.5, 0.6),
    ("mws", 6.0, 2.5, 0.6),
    ("wd", 180.0, 60.0, 0.2),
    ("mwd", 180.0, 60.0, 0.2),
    ("vv", 5000.0, 1500.0, 0.3),
    ("hv1", 20000.0, 6000.0, 0.5),
    ("p1", 0.2, 0.4, 0.1),
    ("p2", 0.5, 0.8, 0.1),
    ("p3", 1.0, 1.2, 0.1),
    ("p4", 2.0, 2.0, 0.1),
    ("p5", 4.0, 3.0, 0.1),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_stations: usize,
    pub n_steps: usize,
    pub n_factors: usize,
    pub seed: u64,
    pub spatial_corr_scale_km: f64,
    /// Amplitudes are in units of each factor's scale.
    pub diurnal_amplitude: f64,
    pub seasonal_amplitude: f64,
    pub seasonal_period: usize,
    pub noise_amplitude: f64,
    /// Lag-one autocorrelation of the correlated term.
    pub noise_persistence: f64,
    pub white_noise: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    pub half_span_deg: f64,
    pub time_start: NaiveDateTime,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_stations: 20,
            n_steps: 2000,
            n_factors: 3,
            seed: 7,
            spatial_corr_scale_km: 300.0,
            diurnal_amplitude: 1.0,
            seasonal_amplitude: 0.3,
            seasonal_period: 24 * 365,
            noise_amplitude: 0.5,
            noise_persistence: 0.95,
            white_noise: 0.1,
            center_lat: 35.0,
            center_lon: 110.0,
            half_span_deg: 4.0,
            time_start: NaiveDate::from_ymd_opt(2017, 1, 1)
                .expect("valid date")
                .and_hms_opt(0, 0, 0)
                .expect("valid time"),
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_stations == 0 || self.n_steps == 0 {
            return Err(Error::Config("synthetic dataset needs N > 0 and T > 0".into()));
        }
        if self.n_factors == 0 || self.n_factors > SYNTH_FACTOR_ORDER.len() {
            return Err(Error::Config(format!(
                "n_factors must be in 1..={}",
                SYNTH_FACTOR_ORDER.len()
            )));
        }
        if self.spatial_corr_scale_km <= 0.0 || !(0.0..1.0).contains(&self.noise_persistence) {
            return Err(Error::Config(
                "spatial_corr_scale_km must be > 0 and noise_persistence in [0, 1)".into(),
            ));
        }
        if self.half_span_deg <= 0.0
            || (self.center_lat.abs() + self.half_span_deg) > 90.0
            || (self.center_lon.abs() + self.half_span_deg) > 180.0
        {
            return Err(Error::Config("station patch leaves the valid lat/lon range".into()));
        }
        Ok(())
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<WeatherSeriesDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, t, d) = (cfg.n_stations, cfg.n_steps, cfg.n_factors);

    let stations: Vec<StationMeta> = (0..n)
        .map(|i| {
            let lat = cfg.center_lat + rng.random_range(-cfg.half_span_deg..cfg.half_span_deg);
            let lon = cfg.center_lon + rng.random_range(-cfg.half_span_deg..cfg.half_span_deg);
            let alt = rng.random_range(0.0..2000.0);
            StationMeta::new(format!("S{i:04}"), lat, lon, alt)
        })
        .collect::<Result<_>>()?;

    let dist = distance_matrix(&stations, DistanceMode::GreatCircle);
    let corr = DMatrix::from_fn(n, n, |i, j| {
        (-dist[[i, j]] / cfg.spatial_corr_scale_km).exp() + if i == j { 1e-9 } else { 0.0 }
    });
    let chol = corr
        .cholesky()
        .ok_or_else(|| Error::Config("spatial covariance is not positive definite".into()))?;
    let l = chol.l();

    let mut values = Array3::<f64>::zeros((n, t, d));
    let innovation = (1.0 - cfg.noise_persistence.powi(2)).sqrt();
    for (f, &(_, mean, scale, sign)) in SYNTH_FACTOR_ORDER.iter().take(d).enumerate() {
        let baseline: Vec<f64> = (0..n)
            .map(|_| mean + 0.5 * scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let amp: Vec<f64> = (0..n).map(|_| 1.0 + 0.2 * rng.random_range(-1.0..1.0)).collect();
        // Local solar time follows longitude.
        let phase: Vec<f64> = stations
            .iter()
            .map(|s| (s.lon - cfg.center_lon) / 15.0)
            .collect();
        let seasonal_phase = rng.random_range(0.0..2.0 * PI);
        let draw = |rng: &mut ChaCha8Rng| {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            &l * z
        };
        let mut latent = draw(&mut rng);
        for k in 0..t {
            if k > 0 {
                let eps = draw(&mut rng);
                latent = latent * cfg.noise_persistence + eps * innovation;
            }
            let season = cfg.seasonal_amplitude
                * (2.0 * PI * k as f64 / cfg.seasonal_period as f64 + seasonal_phase).sin();
            for i in 0..n {
                let hour = k as f64 + phase[i];
                let diurnal = cfg.diurnal_amplitude * sign * amp[i] * (2.0 * PI * hour / 24.0).sin();
                let white = cfg.white_noise * rng.sample::<f64, _>(StandardNormal);
                values[[i, k, f]] = baseline[i]
                    + scale * (diurnal + season + cfg.noise_amplitude * latent[i] + white);
            }
        }
    }
    let factors = SYNTH_FACTOR_ORDER
        .iter()
        .take(d)
        .map(|(name, ..)| name.to_string())
        .collect();
    WeatherSeriesDataset::new(
        stations,
        factors,
        values,
        Array3::from_elem((n, t, d), true),
        cfg.time_start,
    )
}
