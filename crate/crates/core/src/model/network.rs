use ndarray::{Array4, ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, StBlockConfig};
use crate::error::{Error, Result};
use crate::graphs::{
    broadcast_batch, cheb_filter_tape, fuse_tape, scaled_laplacian_tape, DynamicGraphParams,
    uniform, FusionParams, GraphSlot, LaplacianDiagnostics, LearnableGraphParams, StaticGraphSet,
};
use crate::tape::{concat, ops, ParamId, ParamStore, Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    /// `[K, C_in, C_out]`
    pub theta: ParamId,
    /// `[C_out]`
    pub spatial_bias: ParamId,
    /// One `[k, C_out, C_out]` kernel per branch.
    pub branches: Vec<ParamId>,
    /// `[branches * C_out, C_out]`
    pub fuse_w: ParamId,
    pub fuse_b: ParamId,
    /// `[C_in, C_out]`
    pub residual: ParamId,
}

#[derive(Clone, Debug)]
pub struct MfmgcnModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub blocks: Vec<BlockParams>,
    pub learnable: Option<LearnableGraphParams>,
    pub dynamic: Option<DynamicGraphParams>,
    pub fusion: FusionParams,
    /// `[T_rem * C_last, W]`
    pub out_w: ParamId,
    pub out_b: ParamId,
}

fn fan_in_uniform(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: String, shape: &[usize], fan_in: usize) -> ParamId {
    let b = 1.0 / (fan_in.max(1) as f64).sqrt();
    store.add(name, uniform(rng, shape, b))
}

/// Allocates and initializes every parameter from `config.seed`.
pub fn build_model(config: &ModelConfig) -> Result<MfmgcnModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut store = ParamStore::new();
    let n = config.n_nodes;

    let learnable = if config.graphs.contains(&GraphSlot::Learnable) {
        Some(LearnableGraphParams::init(&mut store, n, &config.learnable, &mut rng)?)
    } else {
        None
    };
    let dynamic = if config.graphs.contains(&GraphSlot::Dynamic) {
        Some(DynamicGraphParams::init(&mut store, config.w_in, &config.dynamic, &mut rng)?)
    } else {
        None
    };
    let fusion = FusionParams::init(&mut store, &config.graphs, n)?;

    let mut blocks = Vec::with_capacity(config.blocks.len());
    for (i, b) in config.blocks.iter().enumerate() {
        let (cin, cout, k) = (b.channels_in, b.channels_out, b.cheb_order);
        let theta = fan_in_uniform(&mut store, &mut rng, format!("block{i}.theta"), &[k, cin, cout], k * cin);
        let spatial_bias = store.add(format!("block{i}.spatial_bias"), ArrayD::zeros(IxDyn(&[cout])));
        let branches = b
            .temporal_kernels
            .iter()
            .enumerate()
            .map(|(j, &kt)| {
                fan_in_uniform(&mut store, &mut rng, format!("block{i}.branch{j}"), &[kt, cout, cout], kt * cout)
            })
            .collect();
        let nb = b.temporal_kernels.len();
        let fuse_w = fan_in_uniform(&mut store, &mut rng, format!("block{i}.fuse_w"), &[nb * cout, cout], nb * cout);
        let fuse_b = store.add(format!("block{i}.fuse_b"), ArrayD::zeros(IxDyn(&[cout])));
        let residual = fan_in_uniform(&mut store, &mut rng, format!("block{i}.residual"), &[cin, cout], cin);
        blocks.push(BlockParams {
            theta,
            spatial_bias,
            branches,
            fuse_w,
            fuse_b,
            residual,
        });
    }
    let c_last = config.blocks.last().expect("validated").channels_out;
    let feat = config.remaining_time() * c_last;
    let out_w = fan_in_uniform(&mut store, &mut rng, "output.w".into(), &[feat, config.w_out], feat);
    let out_b = store.add("output.b", ArrayD::zeros(IxDyn(&[config.w_out])));

    Ok(MfmgcnModel {
        config: config.clone(),
        store,
        blocks,
        learnable,
        dynamic,
        fusion,
        out_w,
        out_b,
    })
}

/// `x: [R, T, C]` through parallel convolutions, center-cropped to the
/// longest branch, concatenated on channels and mixed by a 1x1 map.
/// Returns `[R, T - (k_max - 1), C_out]`.
pub fn temporal_multibranch<'t>(
    x: &Var<'t>,
    kernels: &[Var<'t>],
    fuse_w: &Var<'t>,
    fuse_b: Option<&Var<'t>>,
) -> Result<Var<'t>> {
    let shape = x.shape();
    if shape.len() != 3 || kernels.is_empty() {
        return Err(Error::Shape {
            op: "temporal_multibranch",
            left: shape,
            right: vec![kernels.len()],
        });
    }
    let (rows, t) = (shape[0], shape[1]);
    let kmax = kernels.iter().map(|k| k.shape()[0]).max().expect("non-empty");
    if kmax > t {
        return Err(Error::Config(format!("temporal kernel {kmax} exceeds time length {t}")));
    }
    let t_out = t - (kmax - 1);
    let mut outs = Vec::with_capacity(kernels.len());
    for k in kernels {
        let kt = k.shape()[0];
        let y = x.conv1d(k, 1)?;
        outs.push(if kt == kmax { y } else { y.slice(1, (kmax - kt) / 2, t_out)? });
    }
    let cat = if outs.len() == 1 { outs[0] } else { concat(&outs, 2)? };
    let width = cat.shape()[2];
    let mixed = ops::linear(&cat.reshape(&[rows * t_out, width])?, fuse_w, fuse_b)?;
    let cout = mixed.shape()[1];
    Ok(mixed.reshape(&[rows, t_out, cout])?)
}

/// One ST-block on `x: [B, N, T, C_in]` with scaled Laplacians `[B, N, N]`.
pub fn st_block_forward<'t>(
    tape: &'t Tape,
    store: &ParamStore,
    cfg: &StBlockConfig,
    params: &BlockParams,
    x: &Var<'t>,
    l_tilde: &Var<'t>,
) -> Result<Var<'t>> {
    let shape = x.shape();
    if shape.len() != 4 || shape[3] != cfg.channels_in {
        return Err(Error::Shape {
            op: "st_block",
            left: shape,
            right: vec![cfg.channels_in],
        });
    }
    let (b, n, t, cin) = (shape[0], shape[1], shape[2], shape[3]);
    let cout = cfg.channels_out;
    let p = |id: ParamId| tape.param(store, id);

    let spatial = cheb_filter_tape(l_tilde, &p(params.theta), x)?;
    let rows = b * n * t;
    let spatial = ops::add_row_bias(&spatial.reshape(&[rows, cout])?, &p(params.spatial_bias))?
        .relu()
        .reshape(&[b * n, t, cout])?;

    let kernels: Vec<Var<'t>> = params.branches.iter().map(|&id| p(id)).collect();
    let temporal = temporal_multibranch(&spatial, &kernels, &p(params.fuse_w), Some(&p(params.fuse_b)))?;
    let t_out = temporal.shape()[1];

    let offset = (t - t_out) / 2;
    let cropped = x.slice(2, offset, t_out)?.reshape(&[b * n * t_out, cin])?;
    let residual = cropped.matmul(&p(params.residual))?.reshape(&[b * n, t_out, cout])?;
    Ok(temporal.add(&residual)?.relu().reshape(&[b, n, t_out, cout])?)
}

/// Fused, scaled Laplacians for one batch, `[B, N, N]`.
pub fn batch_laplacian<'t>(
    model: &MfmgcnModel,
    tape: &'t Tape,
    inputs: &Var<'t>,
    graphs: &StaticGraphSet,
) -> Result<(Var<'t>, LaplacianDiagnostics)> {
    let shape = inputs.shape();
    let (b, n, w) = (shape[0], shape[1], shape[2]);
    let store = &model.store;
    let mut parts = Vec::with_capacity(model.fusion.slots.len());
    for (slot, &wid) in model.fusion.slots.iter().zip(&model.fusion.weights) {
        let a = match slot {
            GraphSlot::Learnable => model
                .learnable
                .as_ref()
                .expect("allocated with slot")
                .eval_tape(tape, store)?,
            GraphSlot::Dynamic => {
                let z = inputs.slice(3, 0, 1)?.reshape(&[b, n, w])?;
                model
                    .dynamic
                    .as_ref()
                    .expect("allocated with slot")
                    .eval_tape(tape, store, &z)?
            }
            s => {
                let adj = graphs
                    .get(s)
                    .ok_or_else(|| Error::Config(format!("graph set has no {s} graph")))?;
                if adj.n() != n {
                    return Err(Error::Shape {
                        op: "static_graph",
                        left: vec![adj.n()],
                        right: vec![n],
                    });
                }
                tape.constant(adj.weights.clone().into_dyn())
            }
        };
        parts.push((tape.param(store, wid), a));
    }
    let per_window = model.fusion.slots.contains(&GraphSlot::Dynamic);
    let fused = fuse_tape(&parts, if per_window { b } else { 1 })?;
    let (lap, diag) = scaled_laplacian_tape(&fused)?;
    if per_window || b == 1 {
        Ok((lap, diag))
    } else {
        let shared = lap.reshape(&[n, n])?;
        Ok((broadcast_batch(&shared, b)?, diag))
    }
}

/// Normalized forecasts `[B, N, W, 1]` for inputs `[B, N, W', D]`.
pub fn forward_tape<'t>(
    model: &MfmgcnModel,
    tape: &'t Tape,
    inputs: &Array4<f64>,
    graphs: &StaticGraphSet,
) -> Result<Var<'t>> {
    let cfg = &model.config;
    let (b, n, w, d) = inputs.dim();
    if n != cfg.n_nodes || w != cfg.w_in || d != cfg.n_features {
        return Err(Error::Shape {
            op: "forward",
            left: inputs.shape().to_vec(),
            right: vec![cfg.n_nodes, cfg.w_in, cfg.n_features],
        });
    }
    let x = tape.constant(inputs.clone().into_dyn());
    let (lap, _) = batch_laplacian(model, tape, &x, graphs)?;
    let mut h = x;
    for (bc, bp) in cfg.blocks.iter().zip(&model.blocks) {
        h = st_block_forward(tape, &model.store, bc, bp, &h, &lap)?;
    }
    let s = h.shape();
    let flat = h.reshape(&[b * n, s[2] * s[3]])?;
    let y = ops::linear(
        &flat,
        &tape.param(&model.store, model.out_w),
        Some(&tape.param(&model.store, model.out_b)),
    )?;
    Ok(y.reshape(&[b, n, cfg.w_out, 1])?)
}

pub fn forward(model: &MfmgcnModel, inputs: &Array4<f64>, graphs: &StaticGraphSet) -> Result<Array4<f64>> {
    let tape = Tape::new();
    let y = forward_tape(model, &tape, inputs, graphs)?.value();
    Ok(y.into_dimensionality().expect("rank 4"))
}
