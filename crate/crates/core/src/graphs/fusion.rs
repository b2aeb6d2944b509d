use ndarray::{Array2, ArrayD, IxDyn};

use super::adjacency::{Adjacency, GraphKind, GraphSlot};
use crate::error::{Error, Result};
use crate::tape::{ParamId, ParamStore, Var};

/// One `[N, N]` weight matrix per fused graph.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionParams {
    pub slots: Vec<GraphSlot>,
    pub weights: Vec<ParamId>,
}

impl FusionParams {
    /// Every weight starts at `1/|S|`, so the initial fusion is the mean graph.
    pub fn init(store: &mut ParamStore, slots: &[GraphSlot], n: usize) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Config("fusion needs at least one graph".into()));
        }
        for (i, s) in slots.iter().enumerate() {
            if slots[..i].contains(s) {
                return Err(Error::Config(format!("graph {s} listed twice")));
            }
        }
        let w0 = 1.0 / slots.len() as f64;
        let weights = slots
            .iter()
            .map(|s| store.add(format!("fusion.{}", s.short()), ArrayD::from_elem(IxDyn(&[n, n]), w0)))
            .collect();
        Ok(Self {
            slots: slots.to_vec(),
            weights,
        })
    }

    pub fn weight_of(&self, slot: &GraphSlot) -> Option<ParamId> {
        self.slots.iter().position(|s| s == slot).map(|i| self.weights[i])
    }
}

/// `sum_s W_s (.) A_s` on plain matrices.
pub fn fuse_graphs(graphs: &[(&Array2<f64>, &Adjacency)]) -> Result<Adjacency> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::Config("fusion needs at least one graph".into()))?;
    let n = first.1.n();
    let mut out = Array2::<f64>::zeros((n, n));
    for (w, a) in graphs {
        if w.dim() != (n, n) || a.n() != n {
            return Err(Error::Shape {
                op: "fuse_graphs",
                left: w.shape().to_vec(),
                right: a.weights.shape().to_vec(),
            });
        }
        out.zip_mut_with(&(*w * &a.weights), |o, v| *o += v);
    }
    Adjacency::new(GraphKind::Fused, out)
}

/// Fuses using the parameter values in `store`; `graphs` is keyed by the
/// slots of `fusion`.
pub fn fuse_with_params(
    store: &ParamStore,
    fusion: &FusionParams,
    graphs: &[(GraphSlot, &Adjacency)],
) -> Result<Adjacency> {
    let mut pairs = Vec::with_capacity(fusion.slots.len());
    let mats: Vec<Array2<f64>> = fusion
        .weights
        .iter()
        .map(|&id| super::learned::into2(store.get(id).clone()))
        .collect::<Result<_>>()?;
    for (slot, m) in fusion.slots.iter().zip(&mats) {
        let a = graphs
            .iter()
            .find(|(s, _)| s == slot)
            .ok_or_else(|| Error::Config(format!("no {slot} graph supplied for fusion")))?
            .1;
        pairs.push((m, a));
    }
    fuse_graphs(&pairs)
}

/// `[N, N]` to `[B, N, N]` by repetition.
pub fn broadcast_batch<'t>(a: &Var<'t>, b: usize) -> Result<Var<'t>> {
    let shape = a.shape();
    let nn: usize = shape.iter().product();
    let ones = a.tape().constant(ArrayD::ones(IxDyn(&[b, 1])));
    Ok(ones.matmul(&a.reshape(&[1, nn])?)?.reshape(&[b, shape[0], shape[1]])?)
}

/// Recorded fusion. Each entry pairs a `[N, N]` weight with an adjacency that
/// is either shared (`[N, N]`) or per-window (`[B, N, N]`). Returns `[B, N, N]`.
pub fn fuse_tape<'t>(parts: &[(Var<'t>, Var<'t>)], batch: usize) -> Result<Var<'t>> {
    let mut shared: Option<Var<'t>> = None;
    let mut batched: Option<Var<'t>> = None;
    for (w, a) in parts {
        match a.shape().len() {
            2 => {
                let term = w.hadamard(a)?;
                shared = Some(match shared {
                    Some(s) => s.add(&term)?,
                    None => term,
                });
            }
            3 => {
                let term = broadcast_batch(w, batch)?.hadamard(a)?;
                batched = Some(match batched {
                    Some(s) => s.add(&term)?,
                    None => term,
                });
            }
            _ => {
                return Err(Error::Shape {
                    op: "fuse",
                    left: w.shape(),
                    right: a.shape(),
                })
            }
        }
    }
    match (shared, batched) {
        (Some(s), Some(b)) => Ok(broadcast_batch(&s, batch)?.add(&b)?),
        (Some(s), None) => broadcast_batch(&s, batch),
        (None, Some(b)) => Ok(b),
        (None, None) => Err(Error::Config("fusion needs at least one graph".into())),
    }
}
