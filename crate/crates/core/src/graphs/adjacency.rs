use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Distance,
    Neighbor,
    Pattern,
    Learnable,
    Dynamic,
    Fused,
}

/// Dense `N x N` edge-weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjacency {
    pub kind: GraphKind,
    pub weights: Array2<f64>,
}

impl Adjacency {
    pub fn new(kind: GraphKind, weights: Array2<f64>) -> Result<Self> {
        let (r, c) = weights.dim();
        if r != c {
            return Err(Error::Shape {
                op: "adjacency",
                left: vec![r],
                right: vec![c],
            });
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural(format!("{kind:?} adjacency has non-finite entries")));
        }
        Ok(Self { kind, weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| (self.weights[[i, j]] - self.weights[[j, i]]).abs() <= tol))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.weights.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// `min(A_ij, A_ji) == 0` for every pair.
    pub fn is_one_sided(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| self.weights[[i, j]].min(self.weights[[j, i]]) == 0.0))
    }

    /// Applies a node permutation: result `[i, j] = self[perm[i], perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        Self {
            kind: self.kind,
            weights: Array2::from_shape_fn((n, n), |(i, j)| self.weights[[perm[i], perm[j]]]),
        }
    }
}

/// Identifies one input of the fusion sum.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSlot {
    Distance,
    Neighbor,
    Pattern,
    /// Per-factor pattern graph, used when pattern graphs are not averaged.
    PatternFactor(String),
    Learnable,
    Dynamic,
}

impl GraphSlot {
    /// The five-graph set in canonical order.
    pub const ALL: [GraphSlot; 5] = [
        GraphSlot::Distance,
        GraphSlot::Neighbor,
        GraphSlot::Pattern,
        GraphSlot::Learnable,
        GraphSlot::Dynamic,
    ];

    pub fn short(&self) -> String {
        match self {
            GraphSlot::Distance => "D".into(),
            GraphSlot::Neighbor => "N".into(),
            GraphSlot::Pattern => "P".into(),
            GraphSlot::PatternFactor(f) => format!("P:{f}"),
            GraphSlot::Learnable => "L".into(),
            GraphSlot::Dynamic => "K".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "D" | "distance" => GraphSlot::Distance,
            "N" | "neighbor" => GraphSlot::Neighbor,
            "P" | "pattern" => GraphSlot::Pattern,
            "L" | "learnable" => GraphSlot::Learnable,
            "K" | "dynamic" => GraphSlot::Dynamic,
            other => match other.strip_prefix("P:") {
                Some(f) if !f.is_empty() => GraphSlot::PatternFactor(f.to_string()),
                _ => return Err(Error::Config(format!("unknown graph slot {other:?}"))),
            },
        })
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, GraphSlot::Learnable | GraphSlot::Dynamic)
    }
}

impl fmt::Display for GraphSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short())
    }
}
