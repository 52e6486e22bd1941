use serde::{Deserialize, Serialize};

use crate::numerics::matrix::Matrix;

/// A named parameter with its gradient slot.
#[derive(Clone, Debug)]
pub struct ParamTensor {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        ParamTensor {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = Matrix::zeros(self.value.rows(), self.value.cols());
    }
}

/// AdamW with decoupled weight decay. Moment buffers are keyed by the
/// position of each parameter in the slice handed to `step`, so the caller
/// must keep a stable parameter order.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [ParamTensor], lr: f64) {
        if self.m.is_empty() {
            for p in params.iter() {
                self.m.push(Matrix::zeros(p.value.rows(), p.value.cols()));
                self.v.push(Matrix::zeros(p.value.rows(), p.value.cols()));
            }
        }
        debug_assert_eq!(self.m.len(), params.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (idx, p) in params.iter_mut().enumerate() {
            let m = self.m[idx].data_mut();
            let v = self.v[idx].data_mut();
            let g = p.grad.data();
            let w = p.value.data_mut();
            for i in 0..w.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] -= lr * self.weight_decay * w[i] + lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW::new(0.01)
    }
}

/// Step-decay learning rate: base_lr * gamma^floor(epoch / step_epochs).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub gamma: f64,
    pub step_epochs: u32,
}

impl LrSchedule {
    pub fn lr_at(&self, epoch: u32) -> f64 {
        self.base_lr * self.gamma.powi((epoch / self.step_epochs) as i32)
    }

    pub fn validate(&self) -> crate::error::Result<()> {
        if self.base_lr <= 0.0 || !self.base_lr.is_finite() {
            return Err(crate::error::Error::Config(
                "lr schedule: base_lr must be positive".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(crate::error::Error::Config(
                "lr schedule: gamma must be in (0, 1]".into(),
            ));
        }
        if self.step_epochs == 0 {
            return Err(crate::error::Error::Config(
                "lr schedule: step_epochs must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            base_lr: 0.001,
            gamma: 0.1,
            step_epochs: 5,
        }
    }
}
