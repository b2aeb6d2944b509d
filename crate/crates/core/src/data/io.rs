//! Dataset readers and writers.
//!
//! `csv_per_station`: a directory holding `stations.csv`
//! (`station_id,lat,lon,alt,time_start`) and one `<station_id>.csv` per
//! station whose header row lists factor short names, one row per hour.
//! Empty, `NA` or `NaN` cells are missing.
//!
//! `packed_binary` (`W2KT`, little-endian): magic, version `u32`, `N`, `T`,
//! `D` as `u32`, factor-name table, station table (id, lat, lon, alt), start
//! time and step in seconds as `i64`, optional normalisation block, `f64`
//! values row-major `[N][T][D]`, then the mask bit-packed LSB-first.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::dataset::{is_known_factor, NormStats, StationMeta, WeatherSeriesDataset};
use super::quality::DefaultCodes;
use crate::binfmt::{self, ReadLe, WriteLe, LE};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"W2KT";
pub const DATASET_VERSION: u32 = 1;
pub const STATIONS_FILE: &str = "stations.csv";
const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    CsvPerStation,
    PackedBinary,
}

pub fn load_dataset(
    path: &Path,
    format: DataFormat,
    codes: &DefaultCodes,
) -> Result<WeatherSeriesDataset> {
    match format {
        DataFormat::CsvPerStation => read_csv_dir(path, codes),
        DataFormat::PackedBinary => read_packed(path),
    }
}

fn parse_time(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, TIME_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .map_err(|e| Error::Schema(format!("bad time_start {s:?}: {e}")))
}

#[derive(Debug, Deserialize, Serialize)]
struct StationRow {
    station_id: String,
    lat: f64,
    lon: f64,
    alt: f64,
    time_start: String,
}

pub fn read_csv_dir(dir: &Path, codes: &DefaultCodes) -> Result<WeatherSeriesDataset> {
    let mut rdr = csv::Reader::from_path(dir.join(STATIONS_FILE))?;
    let rows: Vec<StationRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!("{} lists no stations", STATIONS_FILE)));
    }
    let time_start = parse_time(&rows[0].time_start)?;
    let mut stations = Vec::with_capacity(rows.len());
    let mut series: Vec<Vec<Vec<Option<f64>>>> = Vec::with_capacity(rows.len());
    let mut factors: Option<Vec<String>> = None;
    for row in &rows {
        if parse_time(&row.time_start)? != time_start {
            return Err(Error::Structural(format!(
                "station {} starts at {} but the first station starts at {}",
                row.station_id, row.time_start, rows[0].time_start
            )));
        }
        stations.push(StationMeta::new(&row.station_id, row.lat, row.lon, row.alt)?);
        let mut r = csv::Reader::from_path(dir.join(format!("{}.csv", row.station_id)))?;
        let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if let Some(bad) = header.iter().find(|h| !is_known_factor(h)) {
            return Err(Error::Schema(format!(
                "unknown factor name {bad:?} in station {}",
                row.station_id
            )));
        }
        match &factors {
            None => factors = Some(header.clone()),
            Some(f) if *f != header => {
                return Err(Error::Structural(format!(
                    "station {} has factors {header:?}, expected {f:?}",
                    row.station_id
                )))
            }
            _ => {}
        }
        let mut rows_out = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Structural(format!(
                    "station {} row {} has {} fields, expected {}",
                    row.station_id,
                    rows_out.len() + 1,
                    rec.len(),
                    header.len()
                )));
            }
            let vals = rec
                .iter()
                .map(|cell| {
                    let c = cell.trim();
                    if c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
                    {
                        Ok(None)
                    } else {
                        c.parse::<f64>().map(Some).map_err(|e| {
                            Error::Schema(format!("station {}: bad number {c:?}: {e}", row.station_id))
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows_out.push(vals);
        }
        series.push(rows_out);
    }
    let factors = factors.unwrap_or_default();
    let t = series[0].len();
    if let Some((i, s)) = series.iter().enumerate().find(|(_, s)| s.len() != t) {
        return Err(Error::Structural(format!(
            "ragged station lengths: {} has {} rows, {} has {t}",
            stations[i].station_id,
            s.len(),
            stations[0].station_id
        )));
    }
    let d = factors.len();
    let n = stations.len();
    let code_of: Vec<Option<f64>> = factors.iter().map(|f| codes.get(f)).collect();
    let mut values = Array3::from_elem((n, t, d), f64::NAN);
    let mut mask = Array3::from_elem((n, t, d), false);
    for (i, s) in series.iter().enumerate() {
        for (k, row) in s.iter().enumerate() {
            for (f, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    values[[i, k, f]] = *v;
                    let is_default = code_of[f] == Some(*v);
                    mask[[i, k, f]] = v.is_finite() && !is_default;
                }
            }
        }
    }
    WeatherSeriesDataset::new(stations, factors, values, mask, time_start)
}

/// Writes the csv_per_station layout. Unobserved cells that are not default
/// codes are written empty.
pub fn write_csv_dir(ds: &WeatherSeriesDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(STATIONS_FILE))?;
    let start = ds.time_start.format(TIME_FORMAT).to_string();
    for s in &ds.stations {
        w.serialize(StationRow {
            station_id: s.station_id.clone(),
            lat: s.lat,
            lon: s.lon,
            alt: s.alt,
            time_start: start.clone(),
        })?;
    }
    w.flush()?;
    for (i, s) in ds.stations.iter().enumerate() {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", s.station_id)))?;
        w.write_record(&ds.factors)?;
        for k in 0..ds.n_steps() {
            let rec: Vec<String> = (0..ds.n_factors())
                .map(|f| {
                    let v = ds.values[[i, k, f]];
                    if v.is_nan() {
                        String::new()
                    } else {
                        format!("{v}")
                    }
                })
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn write_packed(ds: &WeatherSeriesDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_packed_to(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_packed_to(ds: &WeatherSeriesDataset, w: &mut impl Write) -> Result<()> {
    let (n, t, d) = ds.values.dim();
    binfmt::write_magic(w, DATASET_MAGIC, DATASET_VERSION)?;
    for x in [n, t, d] {
        w.write_u32::<LE>(x as u32)?;
    }
    for f in &ds.factors {
        binfmt::write_str(w, f)?;
    }
    for s in &ds.stations {
        binfmt::write_str(w, &s.station_id)?;
        binfmt::write_f64s(w, [s.lat, s.lon, s.alt])?;
    }
    w.write_i64::<LE>(ds.time_start.and_utc().timestamp())?;
    w.write_i64::<LE>(ds.time_step_secs)?;
    match &ds.norm {
        None => w.write_u8(0)?,
        Some(ns) => {
            w.write_u8(1)?;
            binfmt::write_f64s(w, ns.mean.iter().copied())?;
            binfmt::write_f64s(w, ns.std.iter().copied())?;
        }
    }
    binfmt::write_f64s(w, ds.values.iter().copied())?;
    w.write_all(&binfmt::pack_bits(ds.mask.iter().copied()))?;
    Ok(())
}

pub fn read_packed(path: &Path) -> Result<WeatherSeriesDataset> {
    let mut r = BufReader::new(File::open(path)?);
    read_packed_from(&mut r)
}

pub fn read_packed_from(r: &mut impl Read) -> Result<WeatherSeriesDataset> {
    let version = binfmt::read_magic(r, DATASET_MAGIC)?;
    if version != DATASET_VERSION {
        return Err(Error::Version(format!(
            "dataset version {version}, this build reads {DATASET_VERSION}"
        )));
    }
    let n = r.read_u32::<LE>()? as usize;
    let t = r.read_u32::<LE>()? as usize;
    let d = r.read_u32::<LE>()? as usize;
    let factors = (0..d)
        .map(|_| binfmt::read_str(r))
        .collect::<Result<Vec<_>>>()?;
    let mut stations = Vec::with_capacity(n);
    for _ in 0..n {
        let id = binfmt::read_str(r)?;
        let v = binfmt::read_f64s(r, 3)?;
        stations.push(StationMeta {
            station_id: id,
            lat: v[0],
            lon: v[1],
            alt: v[2],
        });
    }
    let secs = r.read_i64::<LE>()?;
    let time_start = DateTime::from_timestamp(secs, 0)
        .ok_or_else(|| Error::Format(format!("bad start timestamp {secs}")))?
        .naive_utc();
    let time_step_secs = r.read_i64::<LE>()?;
    let norm = match r.read_u8()? {
        0 => None,
        1 => Some(NormStats {
            factors: factors.clone(),
            mean: binfmt::read_f64s(r, d)?,
            std: binfmt::read_f64s(r, d)?,
        }),
        x => return Err(Error::Format(format!("bad normalisation flag {x}"))),
    };
    let len = n * t * d;
    let values = Array3::from_shape_vec((n, t, d), binfmt::read_f64s(r, len)?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut bytes = vec![0u8; len.div_ceil(8)];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated mask".into()))?;
    let mask = Array3::from_shape_vec((n, t, d), binfmt::unpack_bits(&bytes, len))
        .map_err(|e| Error::Format(e.to_string()))?;
    let ds = WeatherSeriesDataset {
        stations,
        factors,
        values,
        mask,
        time_start,
        time_step_secs,
        norm,
    };
    ds.validate()?;
    Ok(ds)
}
