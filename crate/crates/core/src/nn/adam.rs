use serde::{Deserialize, Serialize};

use super::{shape_err, NnError, ParamGrad, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for an ordered list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// One bias-corrected Adam update. Moments are created on the first call;
    /// later calls must present the same parameter shapes.
    pub fn step(&mut self, params: &mut [ParamGrad<'_, T>]) -> Result<(), NnError> {
        let cfg = self.config;
        if !(cfg.lr > 0.0) {
            return Err(NnError::LearningRate(cfg.lr));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.param.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(shape_err("adam parameter count", self.m.len(), params.len()));
        }
        for (i, p) in params.iter().enumerate() {
            if p.param.len() != self.m[i].len() || p.grad.len() != p.param.len() {
                return Err(shape_err(
                    "adam parameter shape",
                    self.m[i].len(),
                    (p.param.len(), p.grad.len()),
                ));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let (b1, b2) = (T::cast(cfg.beta1), T::cast(cfg.beta2));
        let (one_b1, one_b2) = (T::cast(1.0 - cfg.beta1), T::cast(1.0 - cfg.beta2));
        let step = T::cast(cfg.lr / bc1);
        let inv_bc2 = T::cast(1.0 / bc2);
        let eps = T::cast(cfg.eps);
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.param.len() {
                let g = p.grad[j];
                m[j] = b1 * m[j] + one_b1 * g;
                v[j] = b2 * v[j] + one_b2 * g * g;
                p.param[j] -= step * m[j] / ((v[j] * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
