//! Station screening, gap filling and box-plot statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::{WeatherSeriesDataset, WEATHER2K_FACTORS};
use crate::error::{Error, Result};

/// Sentinel codes marking "no reading" per factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefaultCodes {
    pub codes: BTreeMap<String, f64>,
}

impl DefaultCodes {
    pub fn empty() -> Self {
        Self {
            codes: BTreeMap::new(),
        }
    }

    /// `999999` for every factor.
    pub fn weather2k() -> Self {
        Self {
            codes: WEATHER2K_FACTORS
                .iter()
                .map(|f| (f.to_string(), 999_999.0))
                .collect(),
        }
    }

    pub fn with(mut self, factor: &str, code: f64) -> Self {
        self.codes.insert(factor.to_string(), code);
        self
    }

    pub fn get(&self, factor: &str) -> Option<f64> {
        self.codes.get(factor).copied()
    }
}

impl Default for DefaultCodes {
    fn default() -> Self {
        Self::weather2k()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationScreen {
    pub station_id: String,
    pub ratio: f64,
    /// Factor responsible for `ratio` when screening is per factor.
    pub factor: Option<String>,
    pub dropped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub rule: String,
    pub max_ratio: f64,
    pub note: String,
    pub stations: Vec<StationScreen>,
    pub dropped: Vec<String>,
}

fn apply_screen(
    ds: &WeatherSeriesDataset,
    rule: &str,
    max_ratio: f64,
    note: &str,
    ratios: Vec<(f64, Option<String>)>,
) -> Result<(WeatherSeriesDataset, ScreenReport)> {
    let mut keep = Vec::new();
    let mut stations = Vec::new();
    let mut dropped = Vec::new();
    for (i, (ratio, factor)) in ratios.into_iter().enumerate() {
        // Exactly at the threshold is retained; only strictly larger drops.
        let drop = ratio > max_ratio;
        let id = ds.stations[i].station_id.clone();
        if drop {
            dropped.push(id.clone());
        } else {
            keep.push(i);
        }
        stations.push(StationScreen {
            station_id: id,
            ratio,
            factor,
            dropped: drop,
        });
    }
    if keep.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "all {} stations exceed the {rule} limit {max_ratio}",
            ds.n_stations()
        )));
    }
    Ok((
        ds.select_stations(&keep),
        ScreenReport {
            rule: rule.to_string(),
            max_ratio,
            note: note.to_string(),
            stations,
            dropped,
        },
    ))
}

/// Drops stations whose share of incomplete time steps exceeds `max_ratio`.
///
/// A step is incomplete when any factor at that step is missing (`NaN` with
/// mask unset). Default-coded cells are handled by [`screen_defaults`].
pub fn screen_missing(
    ds: &WeatherSeriesDataset,
    max_ratio: f64,
) -> Result<(WeatherSeriesDataset, ScreenReport)> {
    let (n, t, d) = ds.values.dim();
    let ratios = (0..n)
        .map(|i| {
            let missing = (0..t)
                .filter(|&k| (0..d).any(|f| !ds.mask[[i, k, f]] && ds.values[[i, k, f]].is_nan()))
                .count();
            (missing as f64 / t as f64, None)
        })
        .collect();
    apply_screen(
        ds,
        "missing",
        max_ratio,
        "ratio counts time steps with at least one missing factor",
        ratios,
    )
}

/// Drops stations where any factor's default-code share exceeds `max_ratio`;
/// surviving default cells become missing.
pub fn screen_defaults(
    ds: &WeatherSeriesDataset,
    codes: &DefaultCodes,
    max_ratio: f64,
) -> Result<(WeatherSeriesDataset, ScreenReport)> {
    let (n, t, _) = ds.values.dim();
    let factor_codes: Vec<f64> = ds
        .factors
        .iter()
        .map(|f| {
            codes
                .get(f)
                .ok_or_else(|| Error::Config(format!("no default code registered for factor {f}")))
        })
        .collect::<Result<_>>()?;
    let ratios = (0..n)
        .map(|i| {
            let mut worst = (0.0, None);
            for (f, &code) in factor_codes.iter().enumerate() {
                let hits = (0..t).filter(|&k| ds.values[[i, k, f]] == code).count();
                let r = hits as f64 / t as f64;
                if r > worst.0 || worst.1.is_none() {
                    worst = (r, Some(ds.factors[f].clone()));
                }
            }
            worst
        })
        .collect();
    let (mut out, report) = apply_screen(
        ds,
        "default",
        max_ratio,
        "ratio is the largest per-factor share of default-coded cells",
        ratios,
    )?;
    ndarray::Zip::indexed(&mut out.values)
        .and(&mut out.mask)
        .for_each(|(_, _, f), v, m| {
            if *v == factor_codes[f] {
                *v = f64::NAN;
                *m = false;
            }
        });
    Ok((out, report))
}

/// Fills unobserved cells by linear interpolation along time; gaps at either
/// end take the nearest observed value. The result is fully observed.
pub fn interpolate_linear(ds: &WeatherSeriesDataset) -> Result<WeatherSeriesDataset> {
    let (n, t, d) = ds.values.dim();
    let mut out = ds.clone();
    for i in 0..n {
        for f in 0..d {
            let observed: Vec<usize> = (0..t).filter(|&k| ds.mask[[i, k, f]]).collect();
            let (Some(&first), Some(&last)) = (observed.first(), observed.last()) else {
                return Err(Error::Unfillable {
                    station: ds.stations[i].station_id.clone(),
                    factor: ds.factors[f].clone(),
                });
            };
            for k in 0..first {
                out.values[[i, k, f]] = ds.values[[i, first, f]];
            }
            for k in last + 1..t {
                out.values[[i, k, f]] = ds.values[[i, last, f]];
            }
            for pair in observed.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if b == a + 1 {
                    continue;
                }
                let (va, vb) = (ds.values[[i, a, f]], ds.values[[i, b, f]]);
                let span = (b - a) as f64;
                for k in a + 1..b {
                    let w = (k - a) as f64 / span;
                    out.values[[i, k, f]] = va + (vb - va) * w;
                }
            }
        }
    }
    out.mask.fill(true);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outlier_indices: Vec<usize>,
}

/// Empirical quantile of sorted data, interpolating linearly between order
/// statistics at position `q * (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Quartiles, 1.5·IQR whiskers and the indices of points outside them.
/// Outliers are reported, never removed.
pub fn boxplot_stats(series: &[f64]) -> Result<BoxStats> {
    if series.is_empty() {
        return Err(Error::EmptyDataset("box plot of an empty series".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Structural("box plot input contains non-finite values".into()));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower = q1 - 1.5 * iqr;
    let upper = q3 + 1.5 * iqr;
    Ok(BoxStats {
        q1,
        median,
        q3,
        mean: series.iter().sum::<f64>() / series.len() as f64,
        lower_whisker: lower,
        upper_whisker: upper,
        outlier_indices: series
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < lower || v > upper)
            .map(|(i, _)| i)
            .collect(),
    })
}

/// Box statistics per factor over every observed cell of the dataset.
pub fn factor_boxplots(ds: &WeatherSeriesDataset) -> Result<BTreeMap<String, BoxStats>> {
    let mut out = BTreeMap::new();
    for (f, name) in ds.factors.iter().enumerate() {
        let vals: Vec<f64> = ds
            .values
            .index_axis(ndarray::Axis(2), f)
            .iter()
            .zip(ds.mask.index_axis(ndarray::Axis(2), f).iter())
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .collect();
        out.insert(name.clone(), boxplot_stats(&vals)?);
    }
    Ok(out)
}
