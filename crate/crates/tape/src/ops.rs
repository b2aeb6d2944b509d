//! Composite helpers built only from recorded primitives.
//!
//! The tape does no implicit broadcasting; these express the few broadcasts the
//! model needs as products with constant ones.

use ndarray::ArrayD;
use ndarray::IxDyn;

use crate::error::{invalid, Result};
use crate::tape::Var;

/// `[c]` or `[1, c]` repeated to `[rows, c]`.
pub fn repeat_rows<'t>(row: &Var<'t>, rows: usize) -> Result<Var<'t>> {
    let shape = row.shape();
    let c = match shape.as_slice() {
        [c] => *c,
        [1, c] => *c,
        _ => return Err(invalid("repeat_rows", format!("expected a row, got {shape:?}"))),
    };
    let row = row.reshape(&[1, c])?;
    let ones = row.tape().constant(ArrayD::ones(IxDyn(&[rows, 1])));
    ones.matmul(&row)
}

/// `x + bias` for `x: [rows, c]`, `bias: [c]`.
pub fn add_row_bias<'t>(x: &Var<'t>, bias: &Var<'t>) -> Result<Var<'t>> {
    let rows = x.shape()[0];
    x.add(&repeat_rows(bias, rows)?)
}

/// Multiplies row `i` of `x: [rows, m]` by `s[i]` for `s: [rows]`.
pub fn scale_rows<'t>(x: &Var<'t>, s: &Var<'t>) -> Result<Var<'t>> {
    let shape = x.shape();
    if shape.len() != 2 || s.shape() != [shape[0]] {
        return Err(invalid(
            "scale_rows",
            format!("x {shape:?} with scales {:?}", s.shape()),
        ));
    }
    let col = s.reshape(&[shape[0], 1])?;
    let ones = x.tape().constant(ArrayD::ones(IxDyn(&[1, shape[1]])));
    x.hadamard(&col.matmul(&ones)?)
}

/// Dense layer on `[rows, c_in]`: `x·w + b`.
pub fn linear<'t>(x: &Var<'t>, w: &Var<'t>, b: Option<&Var<'t>>) -> Result<Var<'t>> {
    let y = x.matmul(w)?;
    match b {
        Some(b) => add_row_bias(&y, b),
        None => Ok(y),
    }
}
