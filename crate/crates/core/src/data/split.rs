use std::ops::Range;

use chrono::NaiveDateTime;
use ndarray::{s, Array4};
use serde::{Deserialize, Serialize};

use super::dataset::WeatherSeriesDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitScheme {
    /// Train/val/test proportions, e.g. `[3, 1, 2]`.
    Ratio([u32; 3]),
    /// Adjacent, ordered step ranges.
    Explicit {
        train: Range<usize>,
        val: Range<usize>,
        test: Range<usize>,
    },
}

impl Default for SplitScheme {
    fn default() -> Self {
        SplitScheme::Ratio([3, 1, 2])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitScheme {
    pub fn ranges(&self, n_steps: usize) -> Result<SplitRanges> {
        let r = match self {
            SplitScheme::Ratio(parts) => {
                let total: u64 = parts.iter().map(|&p| p as u64).sum();
                if total == 0 || parts.contains(&0) {
                    return Err(Error::Config(format!("split ratio {parts:?} has a zero part")));
                }
                let len = |p: u32| (n_steps as u64 * p as u64 / total) as usize;
                let a = len(parts[0]);
                let b = a + len(parts[1]);
                SplitRanges {
                    train: 0..a,
                    val: a..b,
                    test: b..n_steps,
                }
            }
            SplitScheme::Explicit { train, val, test } => SplitRanges {
                train: train.clone(),
                val: val.clone(),
                test: test.clone(),
            },
        };
        let ordered = r.train.end == r.val.start && r.val.end == r.test.start;
        let nonempty = [&r.train, &r.val, &r.test].iter().all(|x| x.start < x.end);
        if !ordered || !nonempty || r.test.end > n_steps {
            return Err(Error::Config(format!(
                "split {r:?} is not three adjacent non-empty ranges within {n_steps} steps"
            )));
        }
        Ok(r)
    }
}

/// Cuts the timeline into contiguous train/validation/test datasets.
pub fn split_temporal(
    ds: &WeatherSeriesDataset,
    scheme: &SplitScheme,
) -> Result<(WeatherSeriesDataset, WeatherSeriesDataset, WeatherSeriesDataset)> {
    let r = scheme.ranges(ds.n_steps())?;
    Ok((
        ds.slice_time(r.train)?,
        ds.slice_time(r.val)?,
        ds.slice_time(r.test)?,
    ))
}

/// Forecast windows over one split. An origin `t` is the last input step:
/// inputs cover `t+1-w_in ..= t`, targets `t+1 ..= t+w_out`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Windows {
    pub w_in: usize,
    pub w_out: usize,
    pub origins: Vec<usize>,
}

pub fn make_windows(n_steps: usize, w_in: usize, w_out: usize, stride: usize) -> Result<Windows> {
    if w_in == 0 || w_out == 0 || stride == 0 {
        return Err(Error::Config(format!(
            "window lengths and stride must be positive (w_in={w_in}, w_out={w_out}, stride={stride})"
        )));
    }
    let origins = if w_in + w_out > n_steps {
        Vec::new()
    } else {
        (w_in - 1..=n_steps - w_out - 1).step_by(stride).collect()
    };
    Ok(Windows {
        w_in,
        w_out,
        origins,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowBatch {
    /// `[B, N, w_in, D]`
    pub inputs: Array4<f64>,
    /// `[B, N, w_out, D]`
    pub targets: Array4<f64>,
    pub origins: Vec<usize>,
    pub timestamps: Vec<NaiveDateTime>,
}

impl WindowBatch {
    pub fn gather(
        ds: &WeatherSeriesDataset,
        origins: &[usize],
        w_in: usize,
        w_out: usize,
    ) -> Result<Self> {
        let (n, t, d) = ds.values.dim();
        let b = origins.len();
        let mut inputs = Array4::zeros((b, n, w_in, d));
        let mut targets = Array4::zeros((b, n, w_out, d));
        for (k, &o) in origins.iter().enumerate() {
            if o + 1 < w_in || o + w_out >= t {
                return Err(Error::Config(format!(
                    "window origin {o} out of bounds for {t} steps"
                )));
            }
            inputs
                .slice_mut(s![k, .., .., ..])
                .assign(&ds.values.slice(s![.., o + 1 - w_in..=o, ..]));
            targets
                .slice_mut(s![k, .., .., ..])
                .assign(&ds.values.slice(s![.., o + 1..=o + w_out, ..]));
        }
        Ok(Self {
            inputs,
            targets,
            origins: origins.to_vec(),
            timestamps: origins.iter().map(|&o| ds.timestamp(o)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

impl Windows {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Batches over `order` (indices into `origins`), `batch_size` at a time.
    pub fn batches<'a>(
        &'a self,
        ds: &'a WeatherSeriesDataset,
        order: &'a [usize],
        batch_size: usize,
    ) -> impl Iterator<Item = Result<WindowBatch>> + 'a {
        order.chunks(batch_size.max(1)).map(move |chunk| {
            let origins: Vec<usize> = chunk.iter().map(|&i| self.origins[i]).collect();
            WindowBatch::gather(ds, &origins, self.w_in, self.w_out)
        })
    }

    pub fn sequential_order(&self) -> Vec<usize> {
        (0..self.origins.len()).collect()
    }
}
