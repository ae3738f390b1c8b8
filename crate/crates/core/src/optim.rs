//! Adam for the networks and Adagrad for the probe classifier.

use serde::{Deserialize, Serialize};

use crate::nn::{Grads, Sequential};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps: default_eps(),
        }
    }
}

/// Adam with bias correction; moments kept per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub steps: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(config: AdamConfig, net: &Sequential<f32>) -> Self {
        let zeros: Vec<Vec<f32>> = net.params().iter().map(|p| vec![0.0; p.values.len()]).collect();
        Self {
            config,
            steps: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Sequential<f32>, grads: &Grads<f32>) {
        self.steps += 1;
        let c = self.config;
        let t = self.steps as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let step = (c.lr / bc1) as f32;
        let (b1, b2) = (c.beta1 as f32, c.beta2 as f32);
        let inv_bc2 = (1.0 / bc2) as f32;
        let eps = c.eps as f32;
        for (((p, g), m), v) in net
            .params_mut()
            .into_iter()
            .zip(&grads.0)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                p[i] -= step * m[i] / ((v[i] * inv_bc2).sqrt() + eps);
            }
        }
    }
}

/// Adagrad over a flat `f64` parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adagrad {
    pub lr: f64,
    pub eps: f64,
    pub accumulator: Vec<f64>,
}

impl Adagrad {
    pub fn new(lr: f64, initial_accumulator: f64, len: usize) -> Self {
        Self {
            lr,
            eps: 1e-10,
            accumulator: vec![initial_accumulator; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        for ((p, &g), a) in params.iter_mut().zip(grads).zip(&mut self.accumulator) {
            *a += g * g;
            *p -= self.lr * g / (a.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, Linear};

    #[test]
    fn adam_first_step_moves_by_lr() {
        // After one step the bias-corrected update is lr * g / (|g| + eps).
        let mut net = Sequential::new(vec![Layer::Linear(Linear {
            name: "l".into(),
            in_features: 1,
            out_features: 1,
            weight: vec![1.0],
            bias: vec![0.0],
        })]);
        let mut opt = Adam::new(AdamConfig::new(0.1, 0.9, 0.999), &net);
        opt.step(&mut net, &Grads(vec![vec![2.0], vec![-3.0]]));
        let Layer::Linear(l) = &net.layers[0] else { unreachable!() };
        assert!((l.weight[0] - 0.9).abs() < 1e-6);
        assert!((l.bias[0] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn adagrad_minimises_a_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = Adagrad::new(0.5, 0.1, 2);
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut x, &g);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-3), "{x:?}");
    }
}
