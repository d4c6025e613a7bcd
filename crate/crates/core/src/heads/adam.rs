use serde::{Deserialize, Serialize};

use super::nn::ParamStore;

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

/// Adam with bias-corrected moments; state covers trainable parameters only.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros = || store.params.iter().map(|p| vec![0.0; if p.trainable { p.value.len() } else { 0 }]).collect();
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        for ((p, m), v) in store.params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if !p.trainable {
                continue;
            }
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // f(w) = w^2 at w = 1: g = 2, m_hat = 2, v_hat = 4.
        let mut store = ParamStore::default();
        store.add("w", vec![1], vec![1.0], true);
        store.params[0].grad[0] = 2.0;
        let mut adam = Adam::new(AdamConfig::default(), &store);
        adam.step(&mut store);
        let expected = 1.0 - 1e-3 * 2.0 / (2.0 + 1e-8);
        assert!((store.params[0].value[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn buffers_are_left_alone() {
        let mut store = ParamStore::default();
        store.add("b", vec![1], vec![3.0], false);
        store.params[0].grad[0] = 1.0;
        let mut adam = Adam::new(AdamConfig::default(), &store);
        adam.step(&mut store);
        assert_eq!(store.params[0].value[0], 3.0);
    }
}
