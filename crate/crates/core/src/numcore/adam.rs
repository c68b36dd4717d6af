use serde::{Deserialize, Serialize};

use super::{Grads, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction; moment buffers mirror the parameter store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| vec![0.0; p.value.as_slice().len()])
                .collect()
        };
        AdamState {
            config,
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Grads) {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for (((param, grad), m), v) in params
            .iter_mut()
            .zip(grads.bufs())
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for (((w, &g), mi), vi) in param
                .value
                .as_mut_slice()
                .iter_mut()
                .zip(grad.as_slice())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * g;
                *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Matrix;

    fn single(w: f64) -> ParamStore {
        let mut store = ParamStore::new();
        store.add("w", Matrix::from_vec(1, 1, vec![w]).unwrap());
        store
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut params = single(0.75);
        let mut adam = AdamState::new(&params, AdamConfig::default());
        let grads = params.zero_grads();
        for _ in 0..10 {
            adam.step(&mut params, &grads);
        }
        assert_eq!(params.flatten(), [0.75]);
    }

    #[test]
    fn constant_gradient_moves_by_lr() {
        let mut params = single(0.0);
        let mut adam = AdamState::new(&params, AdamConfig::default());
        let mut grads = params.zero_grads();
        grads.get_mut(crate::numcore::ParamId(0)).fill(3.0);
        let mut prev = 0.0;
        for i in 0..200 {
            adam.step(&mut params, &grads);
            let w = params.flatten()[0];
            let delta = w - prev;
            assert!(delta < 0.0);
            if i > 100 {
                assert!((delta.abs() - 0.001).abs() < 1e-6, "step {i}: {delta}");
            }
            prev = w;
        }
    }

    #[test]
    fn minimizes_quadratic_bowl() {
        let mut params = single(1.0);
        let mut adam = AdamState::new(&params, AdamConfig { lr: 0.01, ..AdamConfig::default() });
        let mut grads = params.zero_grads();
        for _ in 0..500 {
            let w = params.flatten()[0];
            grads.get_mut(crate::numcore::ParamId(0)).fill(2.0 * w);
            adam.step(&mut params, &grads);
        }
        assert!(params.flatten()[0].abs() < 1e-3, "w = {}", params.flatten()[0]);
    }
}
