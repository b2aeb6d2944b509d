//! Chebyshev polynomial graph filtering, `y = sum_k T_k(L~) x theta_k`.

use ndarray::{s, Array2, Array3, Axis};

use super::laplacian::ScaledLaplacian;
use crate::error::{Error, Result};
use crate::tape::Var;

/// `x: [N, C_in]`, `theta: [K, C_in, C_out]`.
pub fn cheb_filter(lap: &ScaledLaplacian, theta: &Array3<f64>, x: &Array2<f64>) -> Result<Array2<f64>> {
    let (k, cin, cout) = theta.dim();
    let n = lap.l_tilde.nrows();
    if k == 0 || x.dim() != (n, cin) {
        return Err(Error::Shape {
            op: "cheb_filter",
            left: x.shape().to_vec(),
            right: theta.shape().to_vec(),
        });
    }
    let l = &lap.l_tilde;
    let mut y = Array2::<f64>::zeros((n, cout));
    let mut prev = x.clone();
    y += &prev.dot(&theta.index_axis(Axis(0), 0));
    if k == 1 {
        return Ok(y);
    }
    let mut cur = l.dot(x);
    y += &cur.dot(&theta.index_axis(Axis(0), 1));
    for kk in 2..k {
        let next = 2.0 * l.dot(&cur) - &prev;
        y += &next.dot(&theta.slice(s![kk, .., ..]));
        prev = cur;
        cur = next;
    }
    Ok(y)
}

/// Recorded filter over a batch of graphs.
///
/// `l_tilde: [B, N, N]`, `x: [B, N, F, C_in]` (any number `F` of signals per
/// node sharing the channel map, typically time steps),
/// `theta: [K, C_in, C_out]`; returns `[B, N, F, C_out]`.
pub fn cheb_filter_tape<'t>(l_tilde: &Var<'t>, theta: &Var<'t>, x: &Var<'t>) -> Result<Var<'t>> {
    let (ls, ts, xs) = (l_tilde.shape(), theta.shape(), x.shape());
    if ls.len() != 3 || ts.len() != 3 || xs.len() != 4 || xs[0] != ls[0] || xs[1] != ls[1] || xs[3] != ts[1] || ts[0] == 0 {
        return Err(Error::Shape {
            op: "cheb_filter",
            left: xs,
            right: ts,
        });
    }
    let (b, n, f, cin) = (xs[0], xs[1], xs[2], xs[3]);
    let (k, cout) = (ts[0], ts[2]);
    let rows = b * n * f;
    let coef = |kk: usize| -> Result<Var<'t>> { Ok(theta.slice(0, kk, 1)?.reshape(&[cin, cout])?) };
    let term = |t: &Var<'t>, kk: usize| -> Result<Var<'t>> { Ok(t.reshape(&[rows, cin])?.matmul(&coef(kk)?)?) };

    let x3 = x.reshape(&[b, n, f * cin])?;
    let mut y = term(&x3, 0)?;
    if k > 1 {
        let mut prev = x3;
        let mut cur = l_tilde.matmul(&prev)?;
        y = y.add(&term(&cur, 1)?)?;
        for kk in 2..k {
            let next = l_tilde.matmul(&cur)?.scale(2.0).sub(&prev)?;
            y = y.add(&term(&next, kk)?)?;
            prev = cur;
            cur = next;
        }
    }
    Ok(y.reshape(&[b, n, f, cout])?)
}
