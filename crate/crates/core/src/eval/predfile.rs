//! Packed forecast file (`W2KP`, little-endian): magic, version `u32`, `B`,
//! `N`, `W`, `D` as `u32`, factor names, station ids, split name, window
//! origins as `u64` (step indices within the split), a space byte
//! (0 normalized, 1 physical), then `f64` values row-major `[B][N][W][D]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array4;

use super::forecast::{to_physical, SplitPart};
use super::metrics::{compute_metrics, MetricSpace, MetricsReport};
use crate::binfmt::{self, ReadLe, WriteLe, LE};
use crate::data::WindowBatch;
use crate::error::{Error, Result};
use crate::model::{batch_targets, ForecastData};

pub const PRED_MAGIC: &[u8; 4] = b"W2KP";
pub const PRED_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionFile {
    pub factors: Vec<String>,
    pub station_ids: Vec<String>,
    pub split: SplitPart,
    pub origins: Vec<usize>,
    pub space: MetricSpace,
    pub values: Array4<f64>,
}

fn split_name(p: SplitPart) -> &'static str {
    match p {
        SplitPart::Train => "train",
        SplitPart::Val => "val",
        SplitPart::Test => "test",
    }
}

fn parse_split(s: &str) -> Result<SplitPart> {
    Ok(match s {
        "train" => SplitPart::Train,
        "val" => SplitPart::Val,
        "test" => SplitPart::Test,
        other => return Err(Error::Format(format!("unknown split {other:?}"))),
    })
}

impl PredictionFile {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let (b, n, h, d) = self.values.dim();
        if self.origins.len() != b || self.station_ids.len() != n || self.factors.len() != d {
            return Err(Error::Shape {
                op: "prediction_file",
                left: self.values.shape().to_vec(),
                right: vec![self.origins.len(), self.station_ids.len(), self.factors.len()],
            });
        }
        binfmt::write_magic(w, PRED_MAGIC, PRED_VERSION)?;
        for x in [b, n, h, d] {
            w.write_u32::<LE>(x as u32)?;
        }
        for f in &self.factors {
            binfmt::write_str(w, f)?;
        }
        for s in &self.station_ids {
            binfmt::write_str(w, s)?;
        }
        binfmt::write_str(w, split_name(self.split))?;
        for &o in &self.origins {
            w.write_u64::<LE>(o as u64)?;
        }
        w.write_u8(match self.space {
            MetricSpace::Normalized => 0,
            MetricSpace::Physical => 1,
        })?;
        binfmt::write_f64s(w, self.values.iter().copied())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let version = binfmt::read_magic(r, PRED_MAGIC)?;
        if version != PRED_VERSION {
            return Err(Error::Version(format!("prediction file version {version}, expected {PRED_VERSION}")));
        }
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = r.read_u32::<LE>()? as usize;
        }
        let [b, n, h, d] = dims;
        let factors = (0..d).map(|_| binfmt::read_str(r)).collect::<Result<_>>()?;
        let station_ids = (0..n).map(|_| binfmt::read_str(r)).collect::<Result<_>>()?;
        let split = parse_split(&binfmt::read_str(r)?)?;
        let origins = (0..b)
            .map(|_| r.read_u64::<LE>().map(|o| o as usize))
            .collect::<std::io::Result<_>>()?;
        let space = match r.read_u8()? {
            0 => MetricSpace::Normalized,
            1 => MetricSpace::Physical,
            x => return Err(Error::Format(format!("unknown metric space byte {x}"))),
        };
        let vals = binfmt::read_f64s(r, b * n * h * d)?;
        Ok(Self {
            factors,
            station_ids,
            split,
            origins,
            space,
            values: Array4::from_shape_vec((b, n, h, d), vals).expect("length read"),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

/// Scores an externally produced forecast file against the matching windows
/// of `data`, in the space the file declares.
pub fn score_external(file: &PredictionFile, data: &ForecastData) -> Result<MetricsReport> {
    let ds = data.part(file.split);
    let ids: Vec<&str> = ds.stations.iter().map(|s| s.station_id.as_str()).collect();
    if file.station_ids.iter().map(String::as_str).ne(ids.iter().copied()) {
        return Err(Error::Schema("prediction file stations differ from the dataset".into()));
    }
    if file.factors.len() != 1 || file.factors[0] != data.norm.factors[0] {
        return Err(Error::Schema(format!(
            "prediction file holds {:?}, expected [{}]",
            file.factors, data.norm.factors[0]
        )));
    }
    let (b, n, h, d) = file.values.dim();
    if h != data.w_out || n != ds.n_stations() {
        return Err(Error::Shape {
            op: "score_external",
            left: vec![b, n, h, d],
            right: vec![b, ds.n_stations(), data.w_out, 1],
        });
    }
    let batch = WindowBatch::gather(ds, &file.origins, data.w_in, data.w_out)?;
    let mut truth = batch_targets(&batch);
    if file.space == MetricSpace::Physical {
        truth = to_physical(&truth, data.target_mean(), data.target_std());
    }
    compute_metrics(&file.values, &truth, &file.factors, file.space)
}
