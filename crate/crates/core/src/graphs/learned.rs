//! Trainable adjacencies: the static node-embedding graph and the per-window
//! dynamic graph. Both share the antisymmetric construction
//! `relu(tanh(s * (M1 M2^T - M2 M1^T)))`.

use ndarray::{Array2, Array3, ArrayD, IxDyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adjacency::{Adjacency, GraphKind};
use crate::error::{Error, Result};
use crate::tape::{ParamId, ParamStore, Tape, Tensor, Var};

pub(crate) fn uniform(rng: &mut impl Rng, shape: &[usize], bound: f64) -> Tensor {
    ArrayD::from_shape_fn(IxDyn(shape), |_| rng.random_range(-bound..=bound))
}

/// `relu(tanh(s * (m1 m2^T - m2 m1^T)))` for `[N, d]` or `[B, N, d]` inputs.
pub fn antisymmetric_graph<'t>(m1: &Var<'t>, m2: &Var<'t>, s: f64) -> Result<Var<'t>> {
    let a = m1.matmul(&m2.transpose()?)?;
    let b = m2.matmul(&m1.transpose()?)?;
    Ok(a.sub(&b)?.scale(s).tanh().relu())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnableGraphConfig {
    pub d_emb: usize,
    pub alpha: f64,
}

impl Default for LearnableGraphConfig {
    fn default() -> Self {
        Self {
            d_emb: 16,
            alpha: 3.0,
        }
    }
}

/// Handles to the embedding parameters inside a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct LearnableGraphParams {
    pub e1: ParamId,
    pub e2: ParamId,
    pub theta1: ParamId,
    pub theta2: ParamId,
    pub alpha: f64,
}

impl LearnableGraphParams {
    pub fn init(
        store: &mut ParamStore,
        n: usize,
        cfg: &LearnableGraphConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if cfg.d_emb == 0 || !(cfg.alpha > 0.0) {
            return Err(Error::Config(format!(
                "learnable graph needs d_emb >= 1 and alpha > 0, got {cfg:?}"
            )));
        }
        let d = cfg.d_emb;
        let b = 1.0 / (d as f64).sqrt();
        Ok(Self {
            e1: store.add("graph.learn.e1", uniform(rng, &[n, d], 1.0)),
            e2: store.add("graph.learn.e2", uniform(rng, &[n, d], 1.0)),
            theta1: store.add("graph.learn.theta1", uniform(rng, &[d, d], b)),
            theta2: store.add("graph.learn.theta2", uniform(rng, &[d, d], b)),
            alpha: cfg.alpha,
        })
    }

    /// `[N, N]` adjacency recorded on `tape`.
    pub fn eval_tape<'t>(&self, tape: &'t Tape, store: &ParamStore) -> Result<Var<'t>> {
        let m = |e: ParamId, th: ParamId| -> Result<Var<'t>> {
            Ok(tape
                .param(store, e)
                .matmul(&tape.param(store, th))?
                .scale(self.alpha)
                .tanh())
        };
        antisymmetric_graph(&m(self.e1, self.theta1)?, &m(self.e2, self.theta2)?, self.alpha)
    }

    pub fn eval(&self, store: &ParamStore) -> Result<Adjacency> {
        let tape = Tape::new();
        let a = self.eval_tape(&tape, store)?.value();
        Adjacency::new(GraphKind::Learnable, into2(a)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicGraphConfig {
    pub d_emb: usize,
    pub beta: f64,
}

impl Default for DynamicGraphConfig {
    fn default() -> Self {
        Self {
            d_emb: 16,
            beta: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicGraphParams {
    pub w1: ParamId,
    pub w2: ParamId,
    /// Length of the flattened per-node window `Z_i`.
    pub in_dim: usize,
    pub beta: f64,
}

impl DynamicGraphParams {
    pub fn init(
        store: &mut ParamStore,
        in_dim: usize,
        cfg: &DynamicGraphConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if cfg.d_emb == 0 || in_dim == 0 || !(cfg.beta > 0.0) {
            return Err(Error::Config(format!(
                "dynamic graph needs d_emb, input length >= 1 and beta > 0, got {cfg:?} with input {in_dim}"
            )));
        }
        let b = 1.0 / (in_dim as f64).sqrt();
        Ok(Self {
            w1: store.add("graph.dyn.w1", uniform(rng, &[in_dim, cfg.d_emb], b)),
            w2: store.add("graph.dyn.w2", uniform(rng, &[in_dim, cfg.d_emb], b)),
            in_dim,
            beta: cfg.beta,
        })
    }

    /// `z: [B, N, in_dim]` flattened windows to `[B, N, N]` adjacencies.
    pub fn eval_tape<'t>(&self, tape: &'t Tape, store: &ParamStore, z: &Var<'t>) -> Result<Var<'t>> {
        let shape = z.shape();
        if shape.len() != 3 || shape[2] != self.in_dim {
            return Err(Error::Shape {
                op: "dynamic_graph",
                left: shape,
                right: vec![self.in_dim],
            });
        }
        let (b, n) = (shape[0], shape[1]);
        let flat = z.reshape(&[b * n, self.in_dim])?;
        let proj = |w: ParamId| -> Result<Var<'t>> {
            let d = flat.matmul(&tape.param(store, w))?.scale(self.beta).tanh();
            let d_emb = d.shape()[1];
            Ok(d.reshape(&[b, n, d_emb])?)
        };
        antisymmetric_graph(&proj(self.w1)?, &proj(self.w2)?, self.beta)
    }

    /// One window `[N, W', D]`, flattened per node to `W' * D` features.
    pub fn eval(&self, store: &ParamStore, window: &Array3<f64>) -> Result<Adjacency> {
        let (n, w, d) = window.dim();
        let tape = Tape::new();
        let z = tape.constant(
            window
                .as_standard_layout()
                .into_owned()
                .into_shape_with_order(IxDyn(&[1, n, w * d]))
                .expect("contiguous"),
        );
        let a = self.eval_tape(&tape, store, &z)?.value();
        let a = a.into_shape_with_order(IxDyn(&[n, n])).expect("batch of one");
        Adjacency::new(GraphKind::Dynamic, into2(a)?)
    }
}

pub(crate) fn into2(t: Tensor) -> Result<Array2<f64>> {
    let shape = t.shape().to_vec();
    t.into_dimensionality().map_err(|_| Error::Shape {
        op: "into_matrix",
        left: shape,
        right: vec![],
    })
}
