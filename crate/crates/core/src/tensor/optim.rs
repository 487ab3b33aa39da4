use std::collections::{BTreeMap, BTreeSet};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// AdamW hyperparameters and per-parameter moment accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub betas: (f64, f64),
    pub epsilon: f64,
    pub weight_decay: f64,
    /// Parameters updated without decoupled decay.
    pub no_decay: BTreeSet<String>,
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl OptimizerState {
    pub fn new(weight_decay: f64) -> Self {
        OptimizerState {
            betas: (0.9, 0.999),
            epsilon: 1e-8,
            weight_decay,
            no_decay: BTreeSet::new(),
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.first.get(name).map(Vec::as_slice)
    }

    pub fn second_moment(&self, name: &str) -> Option<&[f64]> {
        self.second.get(name).map(Vec::as_slice)
    }
}

/// One AdamW update with decoupled weight decay (`p -= lr * wd * p`) and
/// bias-corrected moments.
///
/// Parameters without an entry in `grads` are left untouched. The whole
/// update is refused if any gradient is non-finite or mis-shaped, so a
/// rejected step leaves `params` and `state` unchanged.
pub fn adamw_step(
    params: &mut ParamStore,
    grads: &BTreeMap<String, Tensor>,
    state: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    for (name, g) in grads {
        let p = params
            .get(name)
            .ok_or_else(|| Error::Input(format!("gradient for unknown parameter `{name}`")))?;
        if p.shape() != g.shape() {
            return Err(Error::shape("adamw_step", p.shape(), g.shape()));
        }
        if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient for `{name}` at element {pos}; update refused"
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = state.betas;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    for (name, g) in grads {
        let p = params.get_mut(name).expect("checked above");
        let n = p.numel();
        let m = state.first.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
        let v = state.second.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
        let decay = if state.no_decay.contains(name) {
            0.0
        } else {
            lr * state.weight_decay
        };
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *pv -= decay * *pv;
            *mv = b1 * *mv + (1.0 - b1) * gv;
            *vv = b2 * *vv + (1.0 - b2) * gv * gv;
            let mhat = *mv / c1;
            let vhat = *vv / c2;
            *pv -= lr * mhat / (vhat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
