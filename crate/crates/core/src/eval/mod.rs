//! Error metrics, horizon curves, the fusion ablation grid, the neighbour
//! count sweep and scoring of forecast files.

mod ablation;
mod forecast;
mod metrics;
mod predfile;

pub use ablation::{
    run_ablation, run_na_sweep, singles_and_full, fusion_grid_specs, train_and_evaluate, AblationRow,
    AblationSpec, AblationTable, ExperimentSetup, NaPoint, NaSweep, SeedRun,
};
pub use forecast::{
    evaluate, horizon_curve, predict_split, score_predictions, to_physical, Forecaster,
    SplitPart, SplitPredictions, EVAL_BATCH,
};
pub use metrics::{
    compute_metrics, curves_to_csv, FactorMetrics, HorizonCurve, MetricCounts, MetricSpace,
    MetricsReport,
};
pub use predfile::{score_external, PredictionFile, PRED_MAGIC, PRED_VERSION};

/// Serializes with sorted object keys and a trailing newline, so equal
/// reports produce equal bytes.
pub fn to_stable_json<T: serde::Serialize>(value: &T) -> crate::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}
