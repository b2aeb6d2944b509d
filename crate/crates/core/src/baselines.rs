//! Reference forecasters: persistence and per-station direct multi-step
//! linear, ridge and kernel ridge regression on the target factor's window.

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, Array3, Array4, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{make_windows, WeatherSeriesDataset};
use crate::error::{Error, Result};

/// Repeats the last input step over `w` horizons: `[N, W', D] -> [N, W, D]`.
pub fn persistence_forecast(inputs: &Array3<f64>, w: usize) -> Array3<f64> {
    let (n, w_in, d) = inputs.dim();
    let last = inputs.index_axis(Axis(1), w_in - 1);
    Array3::from_shape_fn((n, w, d), |(i, _, f)| last[[i, f]])
}

/// Batched persistence on the target channel: `[B, N, W', D] -> [B, N, W, 1]`.
pub fn persistence_batch(inputs: &Array4<f64>, w: usize) -> Array4<f64> {
    let (b, n, w_in, _) = inputs.dim();
    Array4::from_shape_fn((b, n, w, 1), |(k, i, _, _)| inputs[[k, i, w_in - 1, 0]])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    Linear,
    Ridge,
    KernelRidge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-gamma |a - b|^2)`; `None` means `1 / (W' * var(train inputs))`.
    Rbf { gamma: Option<f64> },
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub kind: RegressionKind,
    pub lambda: f64,
    pub kernel: Kernel,
}

impl RegressionConfig {
    pub fn linear() -> Self {
        Self {
            kind: RegressionKind::Linear,
            lambda: 0.0,
            kernel: Kernel::Linear,
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        Self {
            kind: RegressionKind::Ridge,
            lambda,
            kernel: Kernel::Linear,
        }
    }

    pub fn kernel_ridge(lambda: f64, kernel: Kernel) -> Self {
        Self {
            kind: RegressionKind::KernelRidge,
            lambda,
            kernel,
        }
    }
}

/// One station's fitted map from a `W'` window to `W` horizons.
#[derive(Clone, Debug, PartialEq)]
pub enum StationRegressor {
    Primal {
        /// `[W', W]`
        beta: Array2<f64>,
        /// `[W]`
        intercept: Array1<f64>,
    },
    Dual {
        /// Centered training inputs `[n, W']`.
        x_train: Array2<f64>,
        x_mean: Array1<f64>,
        y_mean: Array1<f64>,
        /// `[n, W]`
        dual: Array2<f64>,
        kernel: ResolvedKernel,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedKernel {
    Rbf { gamma: f64 },
    Linear,
}

impl ResolvedKernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            ResolvedKernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            ResolvedKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn col_means(a: &Array2<f64>) -> Array1<f64> {
    a.mean_axis(Axis(0)).expect("non-empty")
}

fn solve_spd(m: DMatrix<f64>, rhs: DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * max.max(1e-300)) {
        return Err(Error::Singular(if lambda == 0.0 {
            "normal equations are singular; use ridge regression (lambda > 0)".into()
        } else {
            format!("regularized system is singular at lambda {lambda}")
        }));
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Singular("system is not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}

/// Fits one station. `x: [n, W']`, `y: [n, W]`. The intercept is never
/// penalized (inputs and targets are centered first).
pub fn fit_station(x: &Array2<f64>, y: &Array2<f64>, cfg: &RegressionConfig) -> Result<StationRegressor> {
    let (n, p) = x.dim();
    if n == 0 || y.nrows() != n {
        return Err(Error::Shape {
            op: "fit_regression",
            left: x.shape().to_vec(),
            right: y.shape().to_vec(),
        });
    }
    if !(cfg.lambda >= 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", cfg.lambda)));
    }
    if cfg.kind == RegressionKind::Ridge && cfg.lambda == 0.0 {
        return Err(Error::Config("ridge needs lambda > 0; use linear for lambda = 0".into()));
    }
    let (xm, ym) = (col_means(x), col_means(y));
    let xc = x - &xm;
    let yc = y - &ym;
    match cfg.kind {
        RegressionKind::Linear | RegressionKind::Ridge => {
            let lambda = if cfg.kind == RegressionKind::Linear { 0.0 } else { cfg.lambda };
            let xn = to_na(&xc);
            let gram = xn.transpose() * &xn + DMatrix::identity(p, p) * lambda;
            let beta = solve_spd(gram, xn.transpose() * to_na(&yc), lambda)?;
            let beta = Array2::from_shape_fn((p, y.ncols()), |(i, j)| beta[(i, j)]);
            let intercept = &ym - &xm.dot(&beta);
            Ok(StationRegressor::Primal { beta, intercept })
        }
        RegressionKind::KernelRidge => {
            let kernel = match cfg.kernel {
                Kernel::Linear => ResolvedKernel::Linear,
                Kernel::Rbf { gamma: Some(g) } if g > 0.0 => ResolvedKernel::Rbf { gamma: g },
                Kernel::Rbf { gamma: Some(g) } => {
                    return Err(Error::Config(format!("RBF gamma must be positive, got {g}")))
                }
                Kernel::Rbf { gamma: None } => {
                    let var = xc.mapv(|v| v * v).mean().unwrap_or(0.0);
                    ResolvedKernel::Rbf {
                        gamma: 1.0 / (p as f64 * var.max(1e-12)),
                    }
                }
            };
            let rows: Vec<Vec<f64>> = xc.rows().into_iter().map(|r| r.to_vec()).collect();
            let mut k = DMatrix::from_fn(n, n, |i, j| kernel.eval(&rows[i], &rows[j]));
            for i in 0..n {
                k[(i, i)] += cfg.lambda;
            }
            let chol = k.cholesky().ok_or_else(|| {
                Error::Singular(format!("kernel matrix is not positive definite at lambda {}", cfg.lambda))
            })?;
            let dual = chol.solve(&to_na(&yc));
            Ok(StationRegressor::Dual {
                x_train: xc,
                x_mean: xm,
                y_mean: ym,
                dual: Array2::from_shape_fn((n, y.ncols()), |(i, j)| dual[(i, j)]),
                kernel,
            })
        }
    }
}

impl StationRegressor {
    /// `x: [m, W'] -> [m, W]`
    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        match self {
            StationRegressor::Primal { beta, intercept } => x.dot(beta) + intercept,
            StationRegressor::Dual {
                x_train,
                x_mean,
                y_mean,
                dual,
                kernel,
            } => {
                let xc = x - x_mean;
                let train_rows: Vec<Vec<f64>> = x_train.rows().into_iter().map(|r| r.to_vec()).collect();
                let kx = Array2::from_shape_fn((x.nrows(), x_train.nrows()), |(i, j)| {
                    kernel.eval(xc.row(i).as_slice().expect("standard layout"), &train_rows[j])
                });
                kx.dot(dual) + y_mean
            }
        }
    }
}

/// Per-station regressors; unfitted until [`fit_regression`] fills them.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionModel {
    pub config: RegressionConfig,
    pub w_in: usize,
    pub w_out: usize,
    pub stations: Vec<StationRegressor>,
}

impl RegressionModel {
    pub fn unfitted(config: RegressionConfig, w_in: usize, w_out: usize) -> Self {
        Self {
            config,
            w_in,
            w_out,
            stations: Vec::new(),
        }
    }

    pub fn is_fitted(&self) -> bool {
        !self.stations.is_empty()
    }
}

/// Window inputs and targets of channel 0 for station `i`: `([n, W'], [n, W])`.
pub fn station_design(ds: &WeatherSeriesDataset, station: usize, w_in: usize, w_out: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let windows = make_windows(ds.n_steps(), w_in, w_out, 1)?;
    let series = ds.values.slice(s![station, .., 0]);
    let n = windows.len();
    let x = Array2::from_shape_fn((n, w_in), |(k, j)| series[windows.origins[k] + 1 - w_in + j]);
    let y = Array2::from_shape_fn((n, w_out), |(k, j)| series[windows.origins[k] + 1 + j]);
    Ok((x, y))
}

/// Fits one regressor per station on every window of `train` (channel 0).
pub fn fit_regression(
    train: &WeatherSeriesDataset,
    w_in: usize,
    w_out: usize,
    cfg: &RegressionConfig,
) -> Result<RegressionModel> {
    let mut model = RegressionModel::unfitted(*cfg, w_in, w_out);
    for i in 0..train.n_stations() {
        let (x, y) = station_design(train, i, w_in, w_out)?;
        if x.nrows() == 0 {
            return Err(Error::EmptyDataset(format!(
                "no {w_in}+{w_out} windows in {} training steps",
                train.n_steps()
            )));
        }
        model.stations.push(fit_station(&x, &y, cfg)?);
    }
    Ok(model)
}

/// `inputs: [B, N, W', D]` to `[B, N, W, 1]` forecasts of channel 0.
pub fn predict_regression(model: &RegressionModel, inputs: &Array4<f64>) -> Result<Array4<f64>> {
    if !model.is_fitted() {
        return Err(Error::NotFitted);
    }
    let (b, n, w_in, _) = inputs.dim();
    if n != model.stations.len() || w_in != model.w_in {
        return Err(Error::Shape {
            op: "predict_regression",
            left: inputs.shape().to_vec(),
            right: vec![model.stations.len(), model.w_in],
        });
    }
    let mut out = Array4::zeros((b, n, model.w_out, 1));
    for (i, reg) in model.stations.iter().enumerate() {
        let x = inputs.slice(s![.., i, .., 0]).to_owned();
        let y = reg.predict(&x);
        out.slice_mut(s![.., i, .., 0]).assign(&y);
    }
    Ok(out)
}
