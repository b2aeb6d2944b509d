use ndarray::{concatenate, Array4, Axis};
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, HorizonCurve, MetricSpace, MetricsReport};
use crate::baselines::{persistence_batch, predict_regression, RegressionModel};
use crate::data::{WeatherSeriesDataset, WindowBatch};
use crate::error::{Error, Result};
use crate::graphs::StaticGraphSet;
use crate::model::{batch_targets, forward, ForecastData, MfmgcnModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPart {
    Train,
    Val,
    Test,
}

impl ForecastData {
    pub fn part(&self, p: SplitPart) -> &WeatherSeriesDataset {
        match p {
            SplitPart::Train => &self.train,
            SplitPart::Val => &self.val,
            SplitPart::Test => &self.test,
        }
    }
}

/// Anything that maps `[B, N, W', D]` normalized inputs to `[B, N, W, 1]`.
pub enum Forecaster<'a> {
    Model {
        model: &'a MfmgcnModel,
        graphs: &'a StaticGraphSet,
    },
    Persistence,
    Regression(&'a RegressionModel),
}

impl Forecaster<'_> {
    pub fn predict(&self, inputs: &Array4<f64>, w_out: usize) -> Result<Array4<f64>> {
        match self {
            Forecaster::Model { model, graphs } => forward(model, inputs, graphs),
            Forecaster::Persistence => Ok(persistence_batch(inputs, w_out)),
            Forecaster::Regression(m) => predict_regression(m, inputs),
        }
    }
}

/// Normalized predictions and truth for every window of one split.
#[derive(Clone, Debug)]
pub struct SplitPredictions {
    pub origins: Vec<usize>,
    pub pred: Array4<f64>,
    pub truth: Array4<f64>,
}

pub const EVAL_BATCH: usize = 64;

pub fn predict_split(f: &Forecaster<'_>, data: &ForecastData, part: SplitPart) -> Result<SplitPredictions> {
    let ds = data.part(part);
    let windows = data.windows(ds)?;
    if windows.is_empty() {
        return Err(Error::EmptyDataset(format!("no forecast windows in the {part:?} split")));
    }
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    for chunk in windows.origins.chunks(EVAL_BATCH) {
        let batch = WindowBatch::gather(ds, chunk, data.w_in, data.w_out)?;
        preds.push(f.predict(&batch.inputs, data.w_out)?);
        truths.push(batch_targets(&batch));
    }
    let cat = |v: &[Array4<f64>]| {
        let views: Vec<_> = v.iter().map(|a| a.view()).collect();
        concatenate(Axis(0), &views).expect("matching shapes")
    };
    Ok(SplitPredictions {
        origins: windows.origins.clone(),
        pred: cat(&preds),
        truth: cat(&truths),
    })
}

/// Maps normalized target-channel values back to physical units.
pub fn to_physical(a: &Array4<f64>, mean: f64, std: f64) -> Array4<f64> {
    a.mapv(|v| v * std + mean)
}

pub fn score_predictions(p: &SplitPredictions, data: &ForecastData, space: MetricSpace) -> Result<MetricsReport> {
    let factors = vec![data.norm.factors[0].clone()];
    match space {
        MetricSpace::Normalized => compute_metrics(&p.pred, &p.truth, &factors, space),
        MetricSpace::Physical => {
            let (m, s) = (data.target_mean(), data.target_std());
            compute_metrics(&to_physical(&p.pred, m, s), &to_physical(&p.truth, m, s), &factors, space)
        }
    }
}

pub fn evaluate(f: &Forecaster<'_>, data: &ForecastData, part: SplitPart, space: MetricSpace) -> Result<MetricsReport> {
    score_predictions(&predict_split(f, data, part)?, data, space)
}

pub fn horizon_curve(
    label: &str,
    f: &Forecaster<'_>,
    data: &ForecastData,
    part: SplitPart,
    space: MetricSpace,
) -> Result<HorizonCurve> {
    HorizonCurve::from_report(label, &evaluate(f, data, part, space)?, 0)
}
