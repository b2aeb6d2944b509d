//! Symmetrized, normalized and rescaled graph Laplacians.

use ndarray::{Array1, Array2, ArrayD, Axis, Ix3, IxDyn};

use super::adjacency::Adjacency;
use crate::error::{Error, Result};
use crate::tape::{ops, Tape, Var};

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITERS: usize = 1000;
/// Upper bound on the spectrum of a normalized Laplacian.
pub const LAMBDA_FALLBACK: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    pub lambda: f64,
    pub vector: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Dominant eigenpair of a symmetric positive semidefinite matrix. Stops when
/// the residual `|Mv - lambda v|` drops below `tol * max(1, lambda)`.
pub fn power_iteration(m: &Array2<f64>, tol: f64, max_iters: usize) -> PowerResult {
    let n = m.nrows();
    // Deterministic start with no special alignment to graph symmetries.
    let mut v = Array1::from_shape_fn(n, |i| ((i + 1) as f64 * 0.618_033_988_749_895).fract() - 0.5 + 1e-3);
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut lambda = 0.0;
    for it in 1..=max_iters {
        let w = m.dot(&v);
        lambda = v.dot(&w);
        let r = &w - &(&v * lambda);
        if r.dot(&r).sqrt() <= tol * lambda.abs().max(1.0) {
            return PowerResult {
                lambda,
                vector: v,
                iterations: it,
                converged: true,
            };
        }
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            break;
        }
        v = w / wn;
    }
    PowerResult {
        lambda,
        vector: v,
        iterations: max_iters,
        converged: false,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaledLaplacian {
    pub l_tilde: Array2<f64>,
    pub lambda_max: f64,
    /// Nodes that had zero degree and received a unit self-loop.
    pub isolated: Vec<usize>,
    pub converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaplacianDiagnostics {
    /// `(batch index, node)` pairs given a self-loop.
    pub isolated: Vec<(usize, usize)>,
    /// Batch indices whose power iteration fell back to `LAMBDA_FALLBACK`.
    pub fallback: Vec<usize>,
    pub lambda: Vec<f64>,
}

/// `[B, N, N]` adjacencies to `[B, N, N]` scaled Laplacians
/// `2 L / lambda_max - I` with `L = I - D^-1/2 S D^-1/2`, `S = (|A| + |A|^T) / 2`.
/// Differentiable in `a`, including through `lambda_max`.
pub fn scaled_laplacian_tape<'t>(a: &Var<'t>) -> Result<(Var<'t>, LaplacianDiagnostics)> {
    let shape = a.shape();
    if shape.len() != 3 || shape[1] != shape[2] {
        return Err(Error::Shape {
            op: "scaled_laplacian",
            left: shape,
            right: vec![],
        });
    }
    let (b, n) = (shape[0], shape[1]);
    let tape = a.tape();
    let abs = a.abs();
    let mut sym = abs.add(&abs.transpose()?)?.scale(0.5);

    let mut diag = LaplacianDiagnostics::default();
    let deg0 = sym.sum_axis(2)?.value();
    let mut loops = ArrayD::<f64>::zeros(IxDyn(&[b, n, n]));
    for bi in 0..b {
        for i in 0..n {
            if deg0[[bi, i]] <= 0.0 {
                loops[[bi, i, i]] = 1.0;
                diag.isolated.push((bi, i));
            }
        }
    }
    if !diag.isolated.is_empty() {
        log::warn!(
            "{} zero-degree node(s) given a unit self-loop before normalization",
            diag.isolated.len()
        );
        sym = sym.add(&tape.constant(loops))?;
    }

    let dinv = sym.sum_axis(2)?.powf(-0.5);
    let outer = dinv.reshape(&[b, n, 1])?.matmul(&dinv.reshape(&[b, 1, n])?)?;
    let eye = tape.constant(
        ArrayD::from_shape_fn(IxDyn(&[b, n, n]), |ix| if ix[1] == ix[2] { 1.0 } else { 0.0 }),
    );
    let lap = eye.sub(&sym.hadamard(&outer)?)?;

    let lambda = lambda_max_tape(&lap, &mut diag)?;
    let inv = lambda.powf(-1.0);
    let scaled = ops::scale_rows(&lap.reshape(&[b, n * n])?, &inv)?
        .scale(2.0)
        .reshape(&[b, n, n])?;
    Ok((scaled.sub(&eye)?, diag))
}

/// Per-batch dominant eigenvalue of `[B, N, N]` symmetric `lap`, shape `[B]`.
/// The gradient uses `d lambda / d L = v v^T`; fallback entries get none.
fn lambda_max_tape<'t>(lap: &Var<'t>, diag: &mut LaplacianDiagnostics) -> Result<Var<'t>> {
    let lv = lap.value().into_dimensionality::<Ix3>().expect("rank checked");
    let (b, n, _) = lv.dim();
    let mut lambdas = Array1::<f64>::zeros(b);
    let mut vecs: Vec<Option<Array1<f64>>> = Vec::with_capacity(b);
    let mut stalled = 0;
    for bi in 0..b {
        let m = lv.index_axis(Axis(0), bi).to_owned();
        let r = power_iteration(&m, POWER_TOL, POWER_MAX_ITERS);
        if r.converged && r.lambda > 1e-12 {
            lambdas[bi] = r.lambda;
            vecs.push(Some(r.vector));
        } else {
            // A graph of isolated self-loops has L = 0; the bound keeps L~ = -I.
            stalled += usize::from(!r.converged);
            lambdas[bi] = LAMBDA_FALLBACK;
            vecs.push(None);
            diag.fallback.push(bi);
        }
    }
    if stalled > 0 {
        log::debug!("power iteration did not converge for {stalled} of {b} graph(s); using lambda_max = {LAMBDA_FALLBACK}");
    }
    diag.lambda = lambdas.to_vec();
    let value = lambdas.into_dyn();
    Ok(lap.tape().custom(&[*lap], value, move |g| {
        let mut out = ArrayD::<f64>::zeros(IxDyn(&[b, n, n]));
        for (bi, v) in vecs.iter().enumerate() {
            if let Some(v) = v {
                for i in 0..n {
                    for j in 0..n {
                        out[[bi, i, j]] = g[[bi]] * v[i] * v[j];
                    }
                }
            }
        }
        vec![out]
    })?)
}

/// Plain-matrix wrapper over [`scaled_laplacian_tape`].
pub fn scaled_laplacian(a: &Adjacency) -> Result<ScaledLaplacian> {
    let n = a.n();
    let tape = Tape::new();
    let av = tape.constant(
        a.weights
            .clone()
            .into_shape_with_order(IxDyn(&[1, n, n]))
            .expect("contiguous"),
    );
    let (l, diag) = scaled_laplacian_tape(&av)?;
    let l_tilde = l
        .value()
        .into_shape_with_order((n, n))
        .expect("batch of one");
    Ok(ScaledLaplacian {
        l_tilde,
        lambda_max: diag.lambda[0],
        isolated: diag.isolated.iter().map(|&(_, i)| i).collect(),
        converged: diag.fallback.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::GraphKind;

    #[test]
    fn complete_graph_k3() {
        let w = Array2::from_shape_fn((3, 3), |(i, j)| if i == j { 0.0 } else { 1.0 });
        let s = scaled_laplacian(&Adjacency::new(GraphKind::Distance, w).unwrap()).unwrap();
        assert!((s.lambda_max - 1.5).abs() < 1e-10);
        assert!(s.converged);
    }

    #[test]
    fn single_node_self_loop_is_minus_identity() {
        let w = Array2::zeros((1, 1));
        let s = scaled_laplacian(&Adjacency::new(GraphKind::Distance, w).unwrap()).unwrap();
        assert_eq!(s.isolated, vec![0]);
        assert_eq!(s.l_tilde[[0, 0]], -1.0);
        assert_eq!(s.lambda_max, LAMBDA_FALLBACK);
    }
}
