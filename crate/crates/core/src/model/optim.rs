//! Adam with linear warmup and inverse square-root decay.

use serde::{Deserialize, Serialize};

use super::params::{ModelConfig, Params};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub warmup_steps: u64,
    /// Rescale the gradient when its global L2 norm exceeds this.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            warmup_steps: 4000,
            clip_norm: None,
        }
    }
}

impl AdamConfig {
    /// Learning rate for 1-based `step`: ramps up linearly for
    /// `warmup_steps`, peaks at `lr`, then decays as `1/sqrt(step)`.
    pub fn learning_rate(&self, step: u64) -> f64 {
        let step = step.max(1) as f64;
        if self.warmup_steps == 0 {
            return self.lr;
        }
        let w = self.warmup_steps as f64;
        self.lr * (step / w).min((w / step).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Params<f32>,
    pub v: Params<f32>,
    /// Number of updates applied so far.
    pub step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, model: &ModelConfig) -> Self {
        Adam {
            config,
            m: Params::zeros(model),
            v: Params::zeros(model),
            step: 0,
        }
    }

    /// Applies one update and returns the learning rate used.
    pub fn update(&mut self, params: &mut Params<f32>, grads: &Params<f32>) -> f64 {
        self.step += 1;
        let c = self.config;
        let lr = c.learning_rate(self.step);
        let clip = match c.clip_norm {
            Some(max) => {
                let norm = grads.l2_norm();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let step_size = (lr / bc1) as f32;
        let (b1, b2) = (c.beta1 as f32, c.beta2 as f32);
        let (inv_bc2, eps, clip) = ((1.0 / bc2) as f32, c.eps as f32, clip as f32);
        for (((p, g), m), v) in params
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(&mut self.m.tensors)
            .zip(&mut self.v.tensors)
        {
            for i in 0..p.data.len() {
                let gi = g.data[i] * clip;
                m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
                v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
                p.data[i] -= step_size * m.data[i] / ((v.data[i] * inv_bc2).sqrt() + eps);
            }
        }
        lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let c = AdamConfig::default();
        assert!((c.learning_rate(4000) - 1e-4).abs() < 1e-15);
        assert!((c.learning_rate(2000) - 5e-5).abs() < 1e-15);
        assert!((c.learning_rate(16000) - 5e-5).abs() < 1e-15);
        let flat = AdamConfig {
            warmup_steps: 0,
            ..c
        };
        assert_eq!(flat.learning_rate(1), 1e-4);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = ModelConfig {
            layers: 1,
            d_model: 2,
            heads: 1,
            ffn_dims: (1, 1),
            vocab_size: 2,
            max_len: 1,
            rel_window: 1,
        };
        let mut params = Params::zeros(&cfg);
        let mut grads = Params::zeros(&cfg);
        grads.tensors[0].data[0] = 3.0;
        grads.tensors[0].data[1] = -0.5;
        let mut adam = Adam::new(
            AdamConfig {
                lr: 0.1,
                warmup_steps: 0,
                ..AdamConfig::default()
            },
            &cfg,
        );
        adam.update(&mut params, &grads);
        assert!((params.tensors[0].data[0] + 0.1).abs() < 1e-6);
        assert!((params.tensors[0].data[1] - 0.1).abs() < 1e-6);
        assert_eq!(params.tensors[0].data[2], 0.0);
    }
}
