//! Station data: ingest, quality screening, gap filling, normalisation,
//! temporal splits, forecast windows and synthetic generation.

mod dataset;
pub mod io;
mod normalize;
mod quality;
mod split;
mod synth;

pub use dataset::{is_known_factor, NormStats, StationMeta, WeatherSeriesDataset, WEATHER2K_FACTORS};
pub use io::{load_dataset, read_csv_dir, read_packed, write_csv_dir, write_packed, DataFormat};
pub use normalize::{denormalize, fit_norm_stats, normalize};
pub use quality::{
    boxplot_stats, factor_boxplots, interpolate_linear, quantile_sorted, screen_defaults,
    screen_missing, BoxStats, DefaultCodes, ScreenReport, StationScreen,
};
pub use split::{make_windows, split_temporal, SplitRanges, SplitScheme, WindowBatch, Windows};
pub use synth::{generate_synthetic, SynthConfig, SYNTH_FACTOR_ORDER};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub stations_in: usize,
    pub stations_out: usize,
    pub missing: ScreenReport,
    pub defaults: ScreenReport,
    pub cells_interpolated: usize,
    pub boxplots: BTreeMap<String, BoxStats>,
}

/// Missing-ratio screen, default-code screen, then linear gap filling.
/// Box-plot outliers are reported per factor but left in place.
pub fn preprocess(
    ds: &WeatherSeriesDataset,
    codes: &DefaultCodes,
    max_missing: f64,
    max_default: f64,
) -> Result<(WeatherSeriesDataset, PreprocessReport)> {
    let (after_missing, missing) = screen_missing(ds, max_missing)?;
    let (after_defaults, defaults) = screen_defaults(&after_missing, codes, max_default)?;
    let cells_interpolated = after_defaults.mask.iter().filter(|&&m| !m).count();
    let filled = interpolate_linear(&after_defaults)?;
    let boxplots = factor_boxplots(&filled)?;
    Ok((
        filled.clone(),
        PreprocessReport {
            stations_in: ds.n_stations(),
            stations_out: filled.n_stations(),
            missing,
            defaults,
            cells_interpolated,
            boxplots,
        },
    ))
}
