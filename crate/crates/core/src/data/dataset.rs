use std::ops::Range;

use chrono::{Duration, NaiveDateTime};
use ndarray::{s, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Short names of the twenty meteorological factors, in the order of the
/// public Weather2K release.
pub const WEATHER2K_FACTORS: [&str; 20] = [
    "ap", "wvp", "t", "mxt", "mnt", "dt", "st", "rh", "ws", "mws", "wd", "mwd", "vv", "hv1",
    "hv2", "p1", "p2", "p3", "p4", "p5",
];

pub fn is_known_factor(name: &str) -> bool {
    WEATHER2K_FACTORS.contains(&name)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub station_id: String,
    /// Degrees north.
    pub lat: f64,
    /// Degrees east.
    pub lon: f64,
    /// Metres above sea level.
    pub alt: f64,
}

impl StationMeta {
    pub fn new(station_id: impl Into<String>, lat: f64, lon: f64, alt: f64) -> Result<Self> {
        let meta = Self {
            station_id: station_id.into(),
            lat,
            lon,
            alt,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::Schema(format!(
                "station {} has out-of-range coordinates ({}, {})",
                self.station_id, self.lat, self.lon
            )));
        }
        if !self.alt.is_finite() {
            return Err(Error::Schema(format!(
                "station {} has non-finite altitude",
                self.station_id
            )));
        }
        Ok(())
    }
}

/// Per-factor z-score parameters, fitted on a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub factors: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Multi-station hourly series `[station, time, factor]`.
///
/// Unobserved cells have `mask == false`. Missing readings carry `NaN`;
/// cells holding a registered default code keep the code until
/// [`screen_defaults`](super::screen_defaults) converts them to missing.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherSeriesDataset {
    pub stations: Vec<StationMeta>,
    pub factors: Vec<String>,
    pub values: Array3<f64>,
    pub mask: Array3<bool>,
    pub time_start: NaiveDateTime,
    pub time_step_secs: i64,
    pub norm: Option<NormStats>,
}

impl WeatherSeriesDataset {
    pub fn new(
        stations: Vec<StationMeta>,
        factors: Vec<String>,
        values: Array3<f64>,
        mask: Array3<bool>,
        time_start: NaiveDateTime,
    ) -> Result<Self> {
        let ds = Self {
            stations,
            factors,
            values,
            mask,
            time_start,
            time_step_secs: 3600,
            norm: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, t, d) = self.values.dim();
        if self.mask.dim() != (n, t, d) {
            return Err(Error::Structural(format!(
                "mask shape {:?} differs from values shape {:?}",
                self.mask.dim(),
                (n, t, d)
            )));
        }
        if n != self.stations.len() || d != self.factors.len() {
            return Err(Error::Structural(format!(
                "tensor is {n}x{t}x{d} but metadata lists {} stations and {} factors",
                self.stations.len(),
                self.factors.len()
            )));
        }
        if t == 0 {
            return Err(Error::Structural("time axis is empty".into()));
        }
        let mut ids: Vec<&str> = self.stations.iter().map(|s| s.station_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Schema(format!("duplicate station id {}", w[0])));
        }
        for s in &self.stations {
            s.validate()?;
        }
        if self
            .values
            .iter()
            .zip(self.mask.iter())
            .any(|(v, &m)| m && !v.is_finite())
        {
            return Err(Error::Structural("non-finite value at an observed cell".into()));
        }
        Ok(())
    }

    pub fn n_stations(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_steps(&self) -> usize {
        self.values.dim().1
    }

    pub fn n_factors(&self) -> usize {
        self.values.dim().2
    }

    pub fn factor_index(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::Schema(format!("factor {name} not present in dataset")))
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.time_start + Duration::seconds(self.time_step_secs * t as i64)
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Keeps the named factors in the given order.
    pub fn select_factors(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.factor_index(n))
            .collect::<Result<_>>()?;
        let norm = self.norm.as_ref().map(|ns| NormStats {
            factors: idx.iter().map(|&i| ns.factors[i].clone()).collect(),
            mean: idx.iter().map(|&i| ns.mean[i]).collect(),
            std: idx.iter().map(|&i| ns.std[i]).collect(),
        });
        Ok(Self {
            stations: self.stations.clone(),
            factors: idx.iter().map(|&i| self.factors[i].clone()).collect(),
            values: self.values.select(Axis(2), &idx),
            mask: self.mask.select(Axis(2), &idx),
            time_start: self.time_start,
            time_step_secs: self.time_step_secs,
            norm,
        })
    }

    pub fn select_stations(&self, keep: &[usize]) -> Self {
        Self {
            stations: keep.iter().map(|&i| self.stations[i].clone()).collect(),
            factors: self.factors.clone(),
            values: self.values.select(Axis(0), keep),
            mask: self.mask.select(Axis(0), keep),
            time_start: self.time_start,
            time_step_secs: self.time_step_secs,
            norm: self.norm.clone(),
        }
    }

    /// Contiguous time sub-range; the start timestamp shifts accordingly.
    pub fn slice_time(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n_steps() {
            return Err(Error::Config(format!(
                "time range {range:?} invalid for {} steps",
                self.n_steps()
            )));
        }
        Ok(Self {
            stations: self.stations.clone(),
            factors: self.factors.clone(),
            values: self.values.slice(s![.., range.clone(), ..]).to_owned(),
            mask: self.mask.slice(s![.., range.clone(), ..]).to_owned(),
            time_start: self.timestamp(range.start),
            time_step_secs: self.time_step_secs,
            norm: self.norm.clone(),
        })
    }
}
