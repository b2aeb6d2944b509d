//! Central finite-difference gradient verification.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Coordinates checked per parameter; `None` checks all of them.
    pub max_coords_per_param: Option<usize>,
    /// Denominator floor for the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coords_per_param: None,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coords_checked: usize,
}

/// Compares tape gradients of the scalar `f` with central differences over
/// the parameters in `only` (all parameters when empty).
pub fn finite_diff_check<F>(
    store: &ParamStore,
    only: &[ParamId],
    cfg: GradCheckConfig,
    f: F,
) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &ParamStore) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let loss = f(&tape, store)?;
    let grads = tape.backward(loss)?;
    let eval = |s: &ParamStore| -> Result<f64> {
        let t = Tape::new();
        Ok(f(&t, s)?.item())
    };

    let ids: Vec<ParamId> = if only.is_empty() {
        store.ids().collect()
    } else {
        only.to_vec()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut work = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coords_checked: 0,
    };
    for id in ids {
        let analytic = grads.get_or_zeros(store, id);
        let n = analytic.len();
        let coords: Vec<usize> = match cfg.max_coords_per_param {
            Some(k) if k < n => sample(&mut rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        for idx in coords {
            let orig = store.get(id).as_slice_memory_order().expect("contiguous")[idx];
            set(&mut work, id, idx, orig + cfg.step);
            let up = eval(&work)?;
            set(&mut work, id, idx, orig - cfg.step);
            let down = eval(&work)?;
            set(&mut work, id, idx, orig);
            let numeric = (up - down) / (2.0 * cfg.step);
            let a = analytic.as_slice_memory_order().expect("contiguous")[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            report.coords_checked += 1;
            if rel > report.max_rel_error || report.worst_param.is_none() {
                report.max_rel_error = rel.max(report.max_rel_error);
                if rel >= report.max_rel_error {
                    report.worst_param = Some(store.name(id).to_string());
                    report.worst_index = idx;
                    report.analytic = a;
                    report.numeric = numeric;
                }
            }
        }
    }
    Ok(report)
}

fn set(store: &mut ParamStore, id: ParamId, idx: usize, v: f64) {
    store
        .get_mut(id)
        .as_slice_memory_order_mut()
        .expect("contiguous")[idx] = v;
}
