//! Minimal dense reverse-mode differentiation over `f64` tensors.
//!
//! A [`Tape`] records every primitive applied to [`Var`] handles in
//! execution order; [`Tape::backward`] walks it once in reverse. There is no
//! implicit broadcasting other than scalar scaling, so every backward rule is
//! a plain shape-preserving formula.

mod adam;
mod check;
mod error;
pub mod ops;
mod params;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use check::{finite_diff_check, GradCheckConfig, GradCheckReport};
pub use error::{Result, TapeError};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use tape::{concat, Tape, Var};

pub type Tensor = ndarray::ArrayD<f64>;
