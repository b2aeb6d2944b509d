use ndarray::ArrayD;

use crate::params::{Gradients, ParamStore};
use crate::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, one per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store
            .ids()
            .map(|id| ArrayD::zeros(store.get(id).raw_dim()))
            .collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update. Parameters without a gradient are treated
/// as having gradient zero.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    cfg: AdamConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let k = id.0;
        let Some(g) = grads.get(id) else {
            // Zero gradient still decays the moments.
            state.m[k].mapv_inplace(|m| cfg.beta1 * m);
            state.v[k].mapv_inplace(|v| cfg.beta2 * v);
            let (m, v) = (&state.m[k], &state.v[k]);
            let p = store.get_mut(id);
            ndarray::Zip::from(p).and(m).and(v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + cfg.eps);
            });
            continue;
        };
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        ndarray::Zip::from(&mut *m)
            .and(&mut *v)
            .and(g)
            .for_each(|m, v, &g| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            });
        let p = store.get_mut(id);
        ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
            *p -= lr * (m / c1) / ((v / c2).sqrt() + cfg.eps);
        });
    }
}
