use ndarray::{s, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpace {
    Normalized,
    Physical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorMetrics {
    pub factor: String,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// Length `W`, one entry per horizon step.
    pub horizon_mae: Vec<f64>,
    pub horizon_mse: Vec<f64>,
    pub horizon_rmse: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub windows: usize,
    pub nodes: usize,
    pub horizon: usize,
    pub factors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub space: MetricSpace,
    pub counts: MetricCounts,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub per_factor: Vec<FactorMetrics>,
}

/// MAE, MSE and RMSE over `[B, N, W, D]` tensors, overall, per factor and
/// per horizon step.
pub fn compute_metrics(
    pred: &Array4<f64>,
    truth: &Array4<f64>,
    factors: &[String],
    space: MetricSpace,
) -> Result<MetricsReport> {
    if pred.dim() != truth.dim() {
        return Err(Error::Shape {
            op: "compute_metrics",
            left: pred.shape().to_vec(),
            right: truth.shape().to_vec(),
        });
    }
    let (b, n, w, d) = pred.dim();
    if factors.len() != d {
        return Err(Error::Shape {
            op: "compute_metrics",
            left: vec![d],
            right: vec![factors.len()],
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset("no predictions to score".into()));
    }
    let err = pred - truth;
    let mut per_factor = Vec::with_capacity(d);
    for (f, name) in factors.iter().enumerate() {
        let mut horizon_mae = Vec::with_capacity(w);
        let mut horizon_mse = Vec::with_capacity(w);
        for h in 0..w {
            let e = err.slice(s![.., .., h, f]);
            let cnt = (b * n) as f64;
            horizon_mae.push(e.iter().map(|v| v.abs()).sum::<f64>() / cnt);
            horizon_mse.push(e.iter().map(|v| v * v).sum::<f64>() / cnt);
        }
        let e = err.slice(s![.., .., .., f]);
        let cnt = (b * n * w) as f64;
        let mae = e.iter().map(|v| v.abs()).sum::<f64>() / cnt;
        let mse = e.iter().map(|v| v * v).sum::<f64>() / cnt;
        per_factor.push(FactorMetrics {
            factor: name.clone(),
            mae,
            mse,
            rmse: mse.sqrt(),
            horizon_rmse: horizon_mse.iter().map(|v| v.sqrt()).collect(),
            horizon_mae,
            horizon_mse,
        });
    }
    let cnt = err.len() as f64;
    let mae = err.iter().map(|v| v.abs()).sum::<f64>() / cnt;
    let mse = err.iter().map(|v| v * v).sum::<f64>() / cnt;
    Ok(MetricsReport {
        space,
        counts: MetricCounts {
            windows: b,
            nodes: n,
            horizon: w,
            factors: d,
        },
        mae,
        mse,
        rmse: mse.sqrt(),
        per_factor,
    })
}

/// Horizon-indexed errors of one factor, for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonCurve {
    pub label: String,
    pub factor: String,
    pub mae: Vec<f64>,
    pub rmse: Vec<f64>,
}

impl HorizonCurve {
    pub fn from_report(label: &str, report: &MetricsReport, factor: usize) -> Result<Self> {
        let f = report
            .per_factor
            .get(factor)
            .ok_or_else(|| Error::Config(format!("report has no factor index {factor}")))?;
        Ok(Self {
            label: label.to_string(),
            factor: f.factor.clone(),
            mae: f.horizon_mae.clone(),
            rmse: f.horizon_rmse.clone(),
        })
    }
}

/// `label,step,mae,rmse` rows with 1-based steps.
pub fn curves_to_csv(curves: &[HorizonCurve]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "factor", "step", "mae", "rmse"])?;
    for c in curves {
        for (h, (m, r)) in c.mae.iter().zip(&c.rmse).enumerate() {
            w.write_record([
                c.label.clone(),
                c.factor.clone(),
                (h + 1).to_string(),
                m.to_string(),
                r.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writes utf-8"))
}
