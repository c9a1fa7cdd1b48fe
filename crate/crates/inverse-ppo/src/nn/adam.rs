//! Adaptive-moment optimizer over a selected subset of the named parameters.

use super::networks::NetworkParameters;
use super::tensor::Tensor;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

struct Slot {
    param_index: usize,
    m: Tensor,
    v: Tensor,
}

/// First/second moment accumulators, step count, and learning rate.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    slots: Vec<Slot>,
}

impl Adam {
    /// Track every parameter whose name matches `select`.
    pub fn for_selected(
        params: &NetworkParameters,
        lr: f64,
        select: impl Fn(&str) -> bool,
    ) -> Self {
        let slots = params
            .tensors()
            .iter()
            .enumerate()
            .filter(|(_, (name, _))| select(name))
            .map(|(i, (_, t))| Slot {
                param_index: i,
                m: Tensor::zeros(t.shape()),
                v: Tensor::zeros(t.shape()),
            })
            .collect();
        Adam {
            lr,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            t: 0,
            slots,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Apply one update from `(parameter index, gradient)` pairs. Tracked
    /// parameters without a gradient this step are left untouched.
    pub fn step(&mut self, params: &mut NetworkParameters, grads: &[(usize, Tensor)]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);

        for slot in &mut self.slots {
            let Some((_, grad)) = grads.iter().find(|(i, _)| *i == slot.param_index) else {
                continue;
            };
            let p = params.tensor_mut(slot.param_index);
            let (pd, gd) = (p.data_mut(), grad.data());
            let (md, vd) = (slot.m.data_mut(), slot.v.data_mut());
            for k in 0..pd.len() {
                md[k] = self.beta1 * md[k] + (1.0 - self.beta1) * gd[k];
                vd[k] = self.beta2 * vd[k] + (1.0 - self.beta2) * gd[k] * gd[k];
                let m_hat = md[k] / bc1;
                let v_hat = vd[k] / bc2;
                pd[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
