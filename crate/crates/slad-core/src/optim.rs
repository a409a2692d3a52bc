//! AdamW with global-norm gradient clipping.

use std::collections::BTreeMap;

use crate::net::ParamStore;
use crate::tensor::{GradMap, Tensor};

/// Global L2 norm over a gradient map.
pub fn grad_norm(grads: &GradMap) -> f64 {
    grads
        .values()
        .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Scales all gradients by `min(1, max_norm / ||g||)`; returns the raw norm.
/// Clipping preserves direction: the result is a positive multiple of the
/// input.
pub fn clip_gradients(grads: &mut GradMap, max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.values_mut() {
            *g = g.scale(s);
        }
    }
    norm
}

pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
    steps: usize,
}

impl AdamW {
    pub fn new(lr: f64, clip_norm: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            clip_norm,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
            steps: 0,
        }
    }

    /// Clips, then applies one AdamW update to every trainable parameter
    /// present in `grads`. Returns the pre-clip gradient norm.
    pub fn step(&mut self, params: &mut ParamStore, grads: &GradMap) -> f64 {
        let mut grads = grads.clone();
        let raw_norm = clip_gradients(&mut grads, self.clip_norm);
        self.steps += 1;
        let bc1 = 1.0 - self.beta1.powi(self.steps as i32);
        let bc2 = 1.0 - self.beta2.powi(self.steps as i32);

        for (name, g) in &grads {
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
            let p = params.get_mut(name);
            for i in 0..g.numel() {
                let gi = g.data()[i];
                let mi = self.beta1 * m.data()[i] + (1.0 - self.beta1) * gi;
                let vi = self.beta2 * v.data()[i] + (1.0 - self.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                let pi = p.data()[i];
                p.data_mut()[i] =
                    pi - self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * pi);
            }
        }
        raw_norm
    }
}
