use ndarray::{s, Array4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::network::{forward, forward_tape, MfmgcnModel};
use crate::data::{
    fit_norm_stats, make_windows, normalize, split_temporal, NormStats, SplitScheme, WeatherSeriesDataset,
    WindowBatch, Windows,
};
use crate::error::{Error, Result};
use crate::graphs::StaticGraphSet;
use crate::tape::{adam_step, AdamConfig, AdamState, Tape};

/// Normalized train/validation/test splits with channel 0 as the target.
#[derive(Clone, Debug)]
pub struct ForecastData {
    pub train: WeatherSeriesDataset,
    pub val: WeatherSeriesDataset,
    pub test: WeatherSeriesDataset,
    pub norm: NormStats,
    pub w_in: usize,
    pub w_out: usize,
}

impl ForecastData {
    /// Selects `factors` (target first), splits, and z-scores with
    /// training-split statistics.
    pub fn prepare(
        ds: &WeatherSeriesDataset,
        factors: &[&str],
        split: &SplitScheme,
        w_in: usize,
        w_out: usize,
    ) -> Result<Self> {
        if !ds.is_complete() {
            return Err(Error::Structural(
                "forecasting needs a gap-free dataset; run preprocessing first".into(),
            ));
        }
        let sel = ds.select_factors(factors)?;
        let (train, val, test) = split_temporal(&sel, split)?;
        let norm = fit_norm_stats(&train)?;
        Ok(Self {
            train: normalize(&train, &norm)?,
            val: normalize(&val, &norm)?,
            test: normalize(&test, &norm)?,
            norm,
            w_in,
            w_out,
        })
    }

    pub fn windows(&self, part: &WeatherSeriesDataset) -> Result<Windows> {
        make_windows(part.n_steps(), self.w_in, self.w_out, 1)
    }

    pub fn target_std(&self) -> f64 {
        self.norm.std[0]
    }

    pub fn target_mean(&self) -> f64 {
        self.norm.mean[0]
    }
}

/// Target channel of a batch, `[B, N, W, 1]`.
pub fn batch_targets(batch: &WindowBatch) -> Array4<f64> {
    batch.targets.slice(s![.., .., .., 0..1]).to_owned()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
    pub lr: f64,
    pub best: bool,
    /// Excluded from serialized histories so reruns compare byte-for-byte.
    #[serde(skip)]
    pub wall_secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub stopped_early: bool,
}

impl TrainHistory {
    /// One JSON object per line.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn wall_secs(&self) -> f64 {
        self.epochs.iter().map(|e| e.wall_secs).sum()
    }
}

/// Mean absolute error of the model over every window of `part`.
pub fn evaluate_mae(
    model: &MfmgcnModel,
    part: &WeatherSeriesDataset,
    windows: &Windows,
    graphs: &StaticGraphSet,
    batch_size: usize,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for batch in windows.batches(part, &windows.sequential_order(), batch_size) {
        let batch = batch?;
        let pred = forward(model, &batch.inputs, graphs)?;
        let truth = batch_targets(&batch);
        sum += (&pred - &truth).mapv(f64::abs).sum();
        count += pred.len();
    }
    if count == 0 {
        return Err(Error::EmptyDataset("no windows to evaluate".into()));
    }
    Ok(sum / count as f64)
}

/// Adam on MAE over shuffled training windows, keeping the parameters with
/// the lowest validation MAE.
pub fn train(
    model: &MfmgcnModel,
    data: &ForecastData,
    graphs: &StaticGraphSet,
    cfg: &TrainConfig,
) -> Result<(MfmgcnModel, TrainHistory)> {
    cfg.validate()?;
    let train_w = data.windows(&data.train)?;
    let val_w = data.windows(&data.val)?;
    if train_w.is_empty() || val_w.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} training and {} validation windows of length {}+{}",
            train_w.len(),
            val_w.len(),
            data.w_in,
            data.w_out
        )));
    }
    let mut current = model.clone();
    let mut best = model.clone();
    let mut adam = AdamState::new(&current.store);
    let adam_cfg = AdamConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory {
        best_val_mae: f64::INFINITY,
        ..Default::default()
    };
    let mut since_best = 0usize;

    for epoch in 1..=cfg.epochs {
        let started = std::time::Instant::now();
        let lr = cfg.lr_at(epoch);
        let mut order = train_w.sequential_order();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for (step, batch) in train_w.batches(&data.train, &order, cfg.batch_size).enumerate() {
            let batch = batch?;
            let tape = Tape::new();
            let pred = forward_tape(&current, &tape, &batch.inputs, graphs)?;
            let truth = tape.constant(batch_targets(&batch).into_dyn());
            let loss = pred.sub(&truth)?.abs().mean();
            let value = loss.item();
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    step: step + 1,
                    value,
                });
            }
            let grads = tape.backward(loss)?;
            adam_step(&mut current.store, &grads, &mut adam, lr, adam_cfg);
            loss_sum += value;
            steps += 1;
        }
        let val_mae = evaluate_mae(&current, &data.val, &val_w, graphs, cfg.batch_size)?;
        if !val_mae.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                step: 0,
                value: val_mae,
            });
        }
        let improved = val_mae < history.best_val_mae;
        if improved {
            history.best_val_mae = val_mae;
            history.best_epoch = epoch;
            best.store = current.store.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / steps.max(1) as f64,
            val_mae,
            lr,
            best: improved,
            wall_secs: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train {:.5} val {:.5} lr {:.3e}{}",
            record.train_loss,
            record.val_mae,
            lr,
            if improved { " *" } else { "" }
        );
        history.epochs.push(record);
        if since_best >= cfg.early_stop_patience {
            history.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    Ok((best, history))
}
