use super::dataset::{NormStats, WeatherSeriesDataset};
use crate::error::{Error, Result};

/// Per-factor mean and population standard deviation over observed cells.
pub fn fit_norm_stats(train: &WeatherSeriesDataset) -> Result<NormStats> {
    let (n, t, d) = train.values.dim();
    let mut mean = Vec::with_capacity(d);
    let mut std = Vec::with_capacity(d);
    for f in 0..d {
        let mut count = 0usize;
        let mut sum = 0.0;
        for i in 0..n {
            for k in 0..t {
                if train.mask[[i, k, f]] {
                    sum += train.values[[i, k, f]];
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(Error::EmptyDataset(format!(
                "factor {} has no observed training cells",
                train.factors[f]
            )));
        }
        let m = sum / count as f64;
        let mut ss = 0.0;
        for i in 0..n {
            for k in 0..t {
                if train.mask[[i, k, f]] {
                    let dv = train.values[[i, k, f]] - m;
                    ss += dv * dv;
                }
            }
        }
        let s = (ss / count as f64).sqrt();
        if !(s > 1e-12 * (1.0 + m.abs())) {
            return Err(Error::ZeroVariance {
                factor: train.factors[f].clone(),
                station: None,
            });
        }
        mean.push(m);
        std.push(s);
    }
    Ok(NormStats {
        factors: train.factors.clone(),
        mean,
        std,
    })
}

fn check_factors(ds: &WeatherSeriesDataset, stats: &NormStats) -> Result<()> {
    if ds.factors != stats.factors {
        return Err(Error::Schema(format!(
            "normalisation stats cover {:?}, dataset has {:?}",
            stats.factors, ds.factors
        )));
    }
    Ok(())
}

/// z-scores every factor with `stats` (fitted on the training split) and
/// records them on the result.
pub fn normalize(ds: &WeatherSeriesDataset, stats: &NormStats) -> Result<WeatherSeriesDataset> {
    check_factors(ds, stats)?;
    let mut out = ds.clone();
    for ((_, _, f), v) in out.values.indexed_iter_mut() {
        *v = (*v - stats.mean[f]) / stats.std[f];
    }
    out.norm = Some(stats.clone());
    Ok(out)
}

pub fn denormalize(ds: &WeatherSeriesDataset, stats: &NormStats) -> Result<WeatherSeriesDataset> {
    check_factors(ds, stats)?;
    let mut out = ds.clone();
    for ((_, _, f), v) in out.values.indexed_iter_mut() {
        *v = *v * stats.std[f] + stats.mean[f];
    }
    out.norm = None;
    Ok(out)
}
