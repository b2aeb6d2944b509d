use std::cell::RefCell;
use std::fmt;

use ndarray::{concatenate, s, Array2, ArrayD, ArrayView2, ArrayViewD, Axis, Ix2, Ix3, IxDyn, Slice};

use crate::error::{invalid, shape_err, Result, TapeError};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::Tensor;

type CustomBackward = Box<dyn Fn(&Tensor) -> Vec<Tensor>>;

pub(crate) enum Op {
    Constant,
    Param(ParamId),
    Add(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    MatMul(usize, usize),
    Tanh(usize),
    Relu(usize),
    Abs(usize),
    Powf(usize, f64),
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { input: usize, axis: usize, start: usize },
    Reshape(usize),
    Permute(usize, Vec<usize>),
    Conv1d { input: usize, kernel: usize, dilation: usize },
    SumAll(usize),
    MeanAll(usize),
    SumAxis(usize, usize),
    Custom { inputs: Vec<usize>, backward: CustomBackward },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of one forward computation. Node order is topological.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

fn as2(t: &Tensor) -> ArrayView2<'_, f64> {
    t.view().into_dimensionality::<Ix2>().expect("rank checked")
}

fn mm(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    a.dot(&b)
}

fn batched(a: &Tensor, b: &Tensor, ta: bool, tb: bool) -> Tensor {
    let a3 = a.view().into_dimensionality::<Ix3>().expect("rank checked");
    let b3 = b.view().into_dimensionality::<Ix3>().expect("rank checked");
    let outs: Vec<Array2<f64>> = a3
        .outer_iter()
        .zip(b3.outer_iter())
        .map(|(x, y)| {
            let x = if ta { x.t() } else { x };
            let y = if tb { y.t() } else { y };
            x.dot(&y)
        })
        .collect();
    let views: Vec<_> = outs.iter().map(|o| o.view().insert_axis(Axis(0))).collect();
    concatenate(Axis(0), &views).expect("uniform").into_dyn()
}

/// Generic matmul on rank-2 or batched rank-3 operands with optional transposes.
fn matmul_t(a: &Tensor, b: &Tensor, ta: bool, tb: bool) -> Tensor {
    if a.ndim() == 2 {
        let x = as2(a);
        let y = as2(b);
        let x = if ta { x.t() } else { x };
        let y = if tb { y.t() } else { y };
        mm(x, y).into_dyn()
    } else {
        batched(a, b, ta, tb)
    }
}

fn conv_tap(x: &Tensor, offset: usize, len: usize) -> Array2<f64> {
    let rows = x.shape()[0];
    let cin = x.shape()[2];
    let x3 = x.view().into_dimensionality::<Ix3>().expect("rank checked");
    x3.slice(s![.., offset..offset + len, ..])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((rows * len, cin))
        .expect("contiguous")
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Constant, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(ArrayD::from_elem(IxDyn(&[]), value))
    }

    /// Records the current value of parameter `id` as a differentiable leaf.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        self.push(store.get(id).clone(), Op::Param(id), true)
    }

    /// Records an externally computed operation. `backward` maps the upstream
    /// gradient to one gradient per input, in input order.
    pub fn custom<'t>(
        &'t self,
        inputs: &[Var<'t>],
        value: Tensor,
        backward: impl Fn(&Tensor) -> Vec<Tensor> + 'static,
    ) -> Result<Var<'t>> {
        for v in inputs {
            self.own(v)?;
        }
        let rg = inputs.iter().any(|v| v.requires_grad());
        Ok(self.push(
            value,
            Op::Custom {
                inputs: inputs.iter().map(|v| v.id).collect(),
                backward: Box::new(backward),
            },
            rg,
        ))
    }

    fn own(&self, v: &Var<'_>) -> Result<()> {
        if std::ptr::eq(self, v.tape) {
            Ok(())
        } else {
            Err(TapeError::ForeignVar)
        }
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        self.own(&loss)?;
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.shape().to_vec();
        if nodes[loss.id].value.len() != 1 {
            return Err(TapeError::NotScalar(shape));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.id).map(|_| None).collect();
        grads[loss.id] = Some(ArrayD::ones(IxDyn(&shape)));
        let mut out = Gradients::default();

        fn acc(grads: &mut [Option<Tensor>], nodes: &[Node], j: usize, g: Tensor) {
            if !nodes[j].requires_grad {
                return;
            }
            match &mut grads[j] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.id).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(pid) => match out.by_param.get_mut(pid) {
                    Some(existing) => *existing += &g,
                    None => {
                        out.by_param.insert(*pid, g);
                    }
                },
                Op::Add(a, b) => {
                    acc(&mut grads, &nodes, *a, g.clone());
                    acc(&mut grads, &nodes, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, &nodes, *a, g.clone());
                    acc(&mut grads, &nodes, *b, -g);
                }
                Op::Hadamard(a, b) => {
                    if nodes[*a].requires_grad {
                        acc(&mut grads, &nodes, *a, &g * &nodes[*b].value);
                    }
                    if nodes[*b].requires_grad {
                        acc(&mut grads, &nodes, *b, &g * &nodes[*a].value);
                    }
                }
                Op::Scale(a, c) => acc(&mut grads, &nodes, *a, g * *c),
                Op::Offset(a) => acc(&mut grads, &nodes, *a, g),
                Op::MatMul(a, b) => {
                    let av = &nodes[*a].value;
                    let bv = &nodes[*b].value;
                    if nodes[*a].requires_grad {
                        acc(&mut grads, &nodes, *a, matmul_t(&g, bv, false, true));
                    }
                    if nodes[*b].requires_grad {
                        acc(&mut grads, &nodes, *b, matmul_t(av, &g, true, false));
                    }
                }
                Op::Tanh(a) => {
                    let d = node.value.mapv(|y| 1.0 - y * y);
                    acc(&mut grads, &nodes, *a, g * d);
                }
                Op::Relu(a) => {
                    let d = nodes[*a].value.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    acc(&mut grads, &nodes, *a, g * d);
                }
                Op::Abs(a) => {
                    let d = nodes[*a].value.mapv(|x| {
                        if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    });
                    acc(&mut grads, &nodes, *a, g * d);
                }
                Op::Powf(a, p) => {
                    let p = *p;
                    let d = nodes[*a].value.mapv(|x| p * x.powf(p - 1.0));
                    acc(&mut grads, &nodes, *a, g * d);
                }
                Op::Concat { inputs, axis } => {
                    let mut start = 0;
                    for &j in inputs {
                        let len = nodes[j].value.shape()[*axis];
                        if nodes[j].requires_grad {
                            let part = g
                                .slice_axis(Axis(*axis), Slice::from(start..start + len))
                                .to_owned();
                            acc(&mut grads, &nodes, j, part);
                        }
                        start += len;
                    }
                }
                Op::Slice { input, axis, start } => {
                    let mut full = ArrayD::zeros(nodes[*input].value.raw_dim());
                    let len = g.shape()[*axis];
                    full.slice_axis_mut(Axis(*axis), Slice::from(*start..*start + len))
                        .assign(&g);
                    acc(&mut grads, &nodes, *input, full);
                }
                Op::Reshape(a) => {
                    let shape = nodes[*a].value.raw_dim();
                    let g = g
                        .as_standard_layout()
                        .into_owned()
                        .into_shape_with_order(shape)
                        .expect("same length");
                    acc(&mut grads, &nodes, *a, g);
                }
                Op::Permute(a, perm) => {
                    let mut inv = vec![0; perm.len()];
                    for (k, &p) in perm.iter().enumerate() {
                        inv[p] = k;
                    }
                    let g = g.permuted_axes(IxDyn(&inv)).as_standard_layout().into_owned();
                    acc(&mut grads, &nodes, *a, g);
                }
                Op::Conv1d {
                    input,
                    kernel,
                    dilation,
                } => {
                    let x = &nodes[*input].value;
                    let w = &nodes[*kernel].value;
                    let (rows, cin) = (x.shape()[0], x.shape()[2]);
                    let (taps, cout) = (w.shape()[0], w.shape()[2]);
                    let tout = g.shape()[1];
                    let g2 = g
                        .as_standard_layout()
                        .into_owned()
                        .into_shape_with_order((rows * tout, cout))
                        .expect("contiguous");
                    if nodes[*kernel].requires_grad {
                        let mut dw = ArrayD::zeros(w.raw_dim());
                        for j in 0..taps {
                            let xs = conv_tap(x, j * dilation, tout);
                            let dwj = xs.t().dot(&g2);
                            dw.index_axis_mut(Axis(0), j).assign(&dwj.into_dyn());
                        }
                        acc(&mut grads, &nodes, *kernel, dw);
                    }
                    if nodes[*input].requires_grad {
                        let mut dx = ArrayD::<f64>::zeros(x.raw_dim());
                        for j in 0..taps {
                            let wj = w.index_axis(Axis(0), j);
                            let wj = wj.into_dimensionality::<Ix2>().expect("rank");
                            let part = g2
                                .dot(&wj.t())
                                .into_shape_with_order((rows, tout, cin))
                                .expect("contiguous");
                            let off = j * dilation;
                            let mut view = dx.slice_axis_mut(Axis(1), Slice::from(off..off + tout));
                            view += &part.into_dyn();
                        }
                        acc(&mut grads, &nodes, *input, dx);
                    }
                }
                Op::SumAll(a) => {
                    let v = g.iter().next().copied().unwrap_or(0.0);
                    acc(&mut grads, &nodes, *a, ArrayD::from_elem(nodes[*a].value.raw_dim(), v));
                }
                Op::MeanAll(a) => {
                    let n = nodes[*a].value.len().max(1) as f64;
                    let v = g.iter().next().copied().unwrap_or(0.0) / n;
                    acc(&mut grads, &nodes, *a, ArrayD::from_elem(nodes[*a].value.raw_dim(), v));
                }
                Op::SumAxis(a, axis) => {
                    let shape = nodes[*a].value.raw_dim();
                    let expanded = g.insert_axis(Axis(*axis));
                    let full = expanded
                        .broadcast(shape)
                        .expect("broadcast along reduced axis")
                        .to_owned();
                    acc(&mut grads, &nodes, *a, full);
                }
                Op::Custom { inputs, backward } => {
                    let parts = backward(&g);
                    for (&j, part) in inputs.iter().zip(parts) {
                        acc(&mut grads, &nodes, j, part);
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn value(&self) -> Tensor {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        self.with_value(|v| v.iter().next().copied().unwrap_or(f64::NAN))
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn unary(&self, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var<'t> {
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let n = &nodes[self.id];
            (f(&n.value), n.requires_grad)
        };
        self.tape.push(value, op, rg)
    }

    fn binary_same(
        &self,
        other: &Var<'t>,
        name: &'static str,
        op: Op,
        f: impl FnOnce(ArrayViewD<'_, f64>, ArrayViewD<'_, f64>) -> Tensor,
    ) -> Result<Var<'t>> {
        self.tape.own(other)?;
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id], &nodes[other.id]);
            if a.value.shape() != b.value.shape() {
                return Err(shape_err(name, a.value.shape(), b.value.shape()));
            }
            (
                f(a.value.view(), b.value.view()),
                a.requires_grad || b.requires_grad,
            )
        };
        Ok(self.tape.push(value, op, rg))
    }

    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.binary_same(other, "add", Op::Add(self.id, other.id), |a, b| &a + &b)
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.binary_same(other, "sub", Op::Sub(self.id, other.id), |a, b| &a - &b)
    }

    pub fn hadamard(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.binary_same(other, "hadamard", Op::Hadamard(self.id, other.id), |a, b| &a * &b)
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        self.unary(Op::Scale(self.id, c), |v| v * c)
    }

    /// Adds a scalar to every element.
    pub fn offset(&self, c: f64) -> Var<'t> {
        self.unary(Op::Offset(self.id), |v| v + c)
    }

    /// `[m,k]·[k,n]` or batched `[b,m,k]·[b,k,n]`.
    pub fn matmul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.tape.own(other)?;
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            let ok = match (a.ndim(), b.ndim()) {
                (2, 2) => a.shape()[1] == b.shape()[0],
                (3, 3) => a.shape()[0] == b.shape()[0] && a.shape()[2] == b.shape()[1],
                _ => false,
            };
            if !ok {
                return Err(shape_err("matmul", a.shape(), b.shape()));
            }
            (
                matmul_t(a, b, false, false),
                nodes[self.id].requires_grad || nodes[other.id].requires_grad,
            )
        };
        Ok(self.tape.push(value, Op::MatMul(self.id, other.id), rg))
    }

    pub fn tanh(&self) -> Var<'t> {
        self.unary(Op::Tanh(self.id), |v| v.mapv(f64::tanh))
    }

    /// `max(x, 0)`; the subgradient at 0 is 0.
    pub fn relu(&self) -> Var<'t> {
        self.unary(Op::Relu(self.id), |v| v.mapv(|x| x.max(0.0)))
    }

    pub fn abs(&self) -> Var<'t> {
        self.unary(Op::Abs(self.id), |v| v.mapv(f64::abs))
    }

    pub fn powf(&self, p: f64) -> Var<'t> {
        self.unary(Op::Powf(self.id, p), |v| v.mapv(|x| x.powf(p)))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let len: usize = shape.iter().product();
        let cur = self.shape();
        if len != cur.iter().product::<usize>() {
            return Err(shape_err("reshape", &cur, shape));
        }
        let shape = shape.to_vec();
        Ok(self.unary(Op::Reshape(self.id), move |v| {
            v.as_standard_layout()
                .into_owned()
                .into_shape_with_order(IxDyn(&shape))
                .expect("length checked")
        }))
    }

    pub fn flatten(&self) -> Var<'t> {
        let n = self.with_value(|v| v.len());
        self.reshape(&[n]).expect("same length")
    }

    pub fn permute(&self, perm: &[usize]) -> Result<Var<'t>> {
        let cur = self.shape();
        let mut seen = vec![false; cur.len()];
        let valid = perm.len() == cur.len()
            && perm.iter().all(|&p| p < cur.len() && !std::mem::replace(&mut seen[p], true));
        if !valid {
            return Err(shape_err("permute", &cur, perm));
        }
        let p = perm.to_vec();
        Ok(self.unary(Op::Permute(self.id, p.clone()), move |v| {
            v.clone()
                .permuted_axes(IxDyn(&p))
                .as_standard_layout()
                .into_owned()
        }))
    }

    /// Swaps the last two axes.
    pub fn transpose(&self) -> Result<Var<'t>> {
        let nd = self.shape().len();
        if nd < 2 {
            return Err(invalid("transpose", format!("rank {nd} < 2")));
        }
        let mut perm: Vec<usize> = (0..nd).collect();
        perm.swap(nd - 2, nd - 1);
        self.permute(&perm)
    }

    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        let cur = self.shape();
        if axis >= cur.len() || start + len > cur[axis] {
            return Err(invalid(
                "slice",
                format!("axis {axis} range {start}..{} out of bounds for {cur:?}", start + len),
            ));
        }
        Ok(self.unary(
            Op::Slice {
                input: self.id,
                axis,
                start,
            },
            |v| {
                v.slice_axis(Axis(axis), Slice::from(start..start + len))
                    .as_standard_layout()
                    .into_owned()
            },
        ))
    }

    pub fn sum(&self) -> Var<'t> {
        self.unary(Op::SumAll(self.id), |v| ArrayD::from_elem(IxDyn(&[]), v.sum()))
    }

    pub fn mean(&self) -> Var<'t> {
        self.unary(Op::MeanAll(self.id), |v| {
            let n = v.len().max(1) as f64;
            ArrayD::from_elem(IxDyn(&[]), v.sum() / n)
        })
    }

    pub fn sum_axis(&self, axis: usize) -> Result<Var<'t>> {
        let cur = self.shape();
        if axis >= cur.len() {
            return Err(invalid("sum_axis", format!("axis {axis} for shape {cur:?}")));
        }
        Ok(self.unary(Op::SumAxis(self.id, axis), |v| v.sum_axis(Axis(axis))))
    }

    /// Valid 1-D convolution along axis 1 of `[rows, time, c_in]` with a
    /// `[taps, c_in, c_out]` kernel. Output time length is
    /// `time - dilation * (taps - 1)`.
    pub fn conv1d(&self, kernel: &Var<'t>, dilation: usize) -> Result<Var<'t>> {
        self.tape.own(kernel)?;
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let (x, w) = (&nodes[self.id].value, &nodes[kernel.id].value);
            if x.ndim() != 3 || w.ndim() != 3 || x.shape()[2] != w.shape()[1] || dilation == 0 {
                return Err(shape_err("conv1d", x.shape(), w.shape()));
            }
            let (rows, t, taps, cout) = (x.shape()[0], x.shape()[1], w.shape()[0], w.shape()[2]);
            let span = dilation * (taps - 1) + 1;
            if taps == 0 || span > t {
                return Err(shape_err("conv1d", x.shape(), w.shape()));
            }
            let tout = t - span + 1;
            let mut out = Array2::<f64>::zeros((rows * tout, cout));
            for j in 0..taps {
                let xs = conv_tap(x, j * dilation, tout);
                let wj = w.index_axis(Axis(0), j);
                let wj = wj.into_dimensionality::<Ix2>().expect("rank");
                out += &xs.dot(&wj);
            }
            let out = out
                .into_shape_with_order((rows, tout, cout))
                .expect("contiguous")
                .into_dyn();
            (out, nodes[self.id].requires_grad || nodes[kernel.id].requires_grad)
        };
        Ok(self.tape.push(
            value,
            Op::Conv1d {
                input: self.id,
                kernel: kernel.id,
                dilation,
            },
            rg,
        ))
    }
}

/// Concatenates along `axis`; all other extents must agree.
pub fn concat<'t>(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
    let first = parts
        .first()
        .ok_or_else(|| invalid("concat", "no inputs"))?;
    let tape = first.tape;
    for p in parts {
        tape.own(p)?;
    }
    let (value, rg) = {
        let nodes = tape.nodes.borrow();
        let base = nodes[first.id].value.shape().to_vec();
        if axis >= base.len() {
            return Err(invalid("concat", format!("axis {axis} for shape {base:?}")));
        }
        for p in parts {
            let s = nodes[p.id].value.shape();
            let same = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(k, (a, b))| k == axis || a == b);
            if !same {
                return Err(shape_err("concat", &base, s));
            }
        }
        let views: Vec<_> = parts.iter().map(|p| nodes[p.id].value.view()).collect();
        (
            concatenate(Axis(axis), &views).expect("checked"),
            parts.iter().any(|p| nodes[p.id].requires_grad),
        )
    };
    Ok(tape.push(
        value,
        Op::Concat {
            inputs: parts.iter().map(|p| p.id).collect(),
            axis,
        },
        rg,
    ))
}
