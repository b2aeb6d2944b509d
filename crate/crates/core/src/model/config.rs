use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{DynamicGraphConfig, GraphSlot, LearnableGraphConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StBlockConfig {
    pub cheb_order: usize,
    /// Odd kernel lengths of the parallel temporal branches.
    pub temporal_kernels: Vec<usize>,
    pub channels_in: usize,
    pub channels_out: usize,
}

impl StBlockConfig {
    pub fn max_kernel(&self) -> usize {
        self.temporal_kernels.iter().copied().max().unwrap_or(1)
    }
}

/// Two blocks, channels `c_in -> 32 -> 32`, `K = [2, 3]`, kernels `[[3], [3, 5]]`.
pub fn default_blocks(c_in: usize) -> Vec<StBlockConfig> {
    vec![
        StBlockConfig {
            cheb_order: 2,
            temporal_kernels: vec![3],
            channels_in: c_in,
            channels_out: 32,
        },
        StBlockConfig {
            cheb_order: 3,
            temporal_kernels: vec![3, 5],
            channels_in: 32,
            channels_out: 32,
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_nodes: usize,
    pub w_in: usize,
    pub w_out: usize,
    /// Input channels per node and step; channel 0 is the forecast target.
    pub n_features: usize,
    pub blocks: Vec<StBlockConfig>,
    /// Graphs entering the fusion sum.
    pub graphs: Vec<GraphSlot>,
    pub learnable: LearnableGraphConfig,
    pub dynamic: DynamicGraphConfig,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(n_nodes: usize, w_in: usize, w_out: usize, n_features: usize, seed: u64) -> Self {
        Self {
            n_nodes,
            w_in,
            w_out,
            n_features,
            blocks: default_blocks(n_features),
            graphs: GraphSlot::ALL.to_vec(),
            learnable: LearnableGraphConfig::default(),
            dynamic: DynamicGraphConfig::default(),
            seed,
        }
    }

    /// Time steps left after every block.
    pub fn remaining_time(&self) -> usize {
        self.blocks
            .iter()
            .fold(self.w_in, |t, b| t.saturating_sub(b.max_kernel() - 1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 || self.w_in == 0 || self.w_out == 0 || self.n_features == 0 {
            return Err(Error::Config(format!(
                "n_nodes, w_in, w_out and n_features must be positive (got {}, {}, {}, {})",
                self.n_nodes, self.w_in, self.w_out, self.n_features
            )));
        }
        if self.blocks.is_empty() {
            return Err(Error::Config("model needs at least one ST-block".into()));
        }
        if self.graphs.is_empty() {
            return Err(Error::Config("model needs at least one graph".into()));
        }
        let mut t = self.w_in;
        let mut c = self.n_features;
        let mut prev: Option<&StBlockConfig> = None;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.cheb_order == 0 {
                return Err(Error::Config(format!("block {i}: cheb_order must be >= 1")));
            }
            if b.temporal_kernels.is_empty() {
                return Err(Error::Config(format!("block {i}: needs at least one temporal branch")));
            }
            if let Some(k) = b.temporal_kernels.iter().find(|&&k| k == 0 || k % 2 == 0) {
                return Err(Error::Config(format!("block {i}: temporal kernel {k} must be odd and >= 1")));
            }
            if b.channels_in != c || b.channels_out == 0 {
                return Err(Error::Config(format!(
                    "block {i}: channels_in {} does not match incoming {c} (or channels_out is 0)",
                    b.channels_in
                )));
            }
            if let Some(p) = prev {
                if b.cheb_order < p.cheb_order {
                    return Err(Error::Config(format!(
                        "block {i}: cheb_order {} decreases from {} (spatial receptive field must not shrink)",
                        b.cheb_order, p.cheb_order
                    )));
                }
                if b.max_kernel() < p.max_kernel() {
                    return Err(Error::Config(format!(
                        "block {i}: temporal receptive field {} decreases from {}",
                        b.max_kernel(),
                        p.max_kernel()
                    )));
                }
            }
            if b.max_kernel() > t {
                return Err(Error::Config(format!(
                    "block {i}: temporal kernel {} exceeds remaining time length {t}",
                    b.max_kernel()
                )));
            }
            t -= b.max_kernel() - 1;
            c = b.channels_out;
            prev = Some(b);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrDecayMode {
    /// `lr <- lr * (1 - factor)`
    Reduce,
    /// `lr <- lr * factor`
    Multiply,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub early_stop_patience: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub decay_window: usize,
    pub lr_decay_mode: LrDecayMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            early_stop_patience: 50,
            batch_size: 32,
            lr0: 1e-2,
            lr_decay_factor: 0.05,
            lr_decay_every: 10,
            decay_window: 50,
            lr_decay_mode: LrDecayMode::Reduce,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Learning rate for 1-based `epoch`: one decay step at the start of each
    /// completed `lr_decay_every` period, counting only periods that end
    /// within the first `decay_window` epochs.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let every = self.lr_decay_every.max(1);
        let max_steps = self.decay_window / every;
        let steps = (epoch.saturating_sub(1) / every).min(max_steps);
        let mult = match self.lr_decay_mode {
            LrDecayMode::Reduce => 1.0 - self.lr_decay_factor,
            LrDecayMode::Multiply => self.lr_decay_factor,
        };
        self.lr0 * mult.powi(steps as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr0 >= 0.0) || !self.lr0.is_finite() {
            return Err(Error::Config(format!("lr0 must be finite and >= 0, got {}", self.lr0)));
        }
        if !(0.0..=1.0).contains(&self.lr_decay_factor) {
            return Err(Error::Config(format!(
                "lr_decay_factor must be in [0, 1], got {}",
                self.lr_decay_factor
            )));
        }
        Ok(())
    }
}
