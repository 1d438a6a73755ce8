//! Model configuration and the flat parameter list.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn_dims: (usize, usize),
    pub vocab_size: usize,
    pub max_len: usize,
    /// Largest relative distance covered by the relative embeddings, plus one.
    pub rel_window: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 8,
            d_model: 512,
            heads: 8,
            ffn_dims: (512, 256),
            vocab_size: 725,
            max_len: 2048,
            rel_window: 2048,
        }
    }
}

impl ModelConfig {
    /// A small configuration; `rel_window` follows `max_len`.
    pub fn tiny(vocab_size: usize, max_len: usize) -> Self {
        ModelConfig {
            layers: 2,
            d_model: 64,
            heads: 4,
            ffn_dims: (128, 64),
            vocab_size,
            max_len,
            rel_window: max_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.layers,
            self.d_model,
            self.heads,
            self.ffn_dims.0,
            self.ffn_dims.1,
            self.vocab_size,
            self.max_len,
            self.rel_window,
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("all model dimensions must be at least 1".into()));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::InvalidConfig(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    /// Names and shapes of every tensor, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let d = self.d_model;
        let (h1, h2) = self.ffn_dims;
        let mut out = vec![
            ("token_embedding".to_string(), vec![self.vocab_size, d]),
            ("positional_embedding".to_string(), vec![self.max_len, d]),
        ];
        for l in 0..self.layers {
            let layer: [(&str, Vec<usize>); PER_LAYER] = [
                ("ln1_gain", vec![d]),
                ("ln1_bias", vec![d]),
                ("w_q", vec![d, d]),
                ("w_k", vec![d, d]),
                ("w_v", vec![d, d]),
                ("w_o", vec![d, d]),
                ("rel_embedding", vec![self.heads, self.rel_window, self.head_dim()]),
                ("ln2_gain", vec![d]),
                ("ln2_bias", vec![d]),
                ("ffn_w1", vec![d, h1]),
                ("ffn_b1", vec![h1]),
                ("ffn_w2", vec![h1, h2]),
                ("ffn_b2", vec![h2]),
                ("ffn_w3", vec![h2, d]),
                ("ffn_b3", vec![d]),
            ];
            out.extend(layer.into_iter().map(|(n, s)| (format!("layer{l}.{n}"), s)));
        }
        out.push(("final_ln_gain".to_string(), vec![d]));
        out.push(("final_ln_bias".to_string(), vec![d]));
        out.push(("output_bias".to_string(), vec![self.vocab_size]));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

pub const TOKEN_EMBEDDING: usize = 0;
pub const POSITIONAL_EMBEDDING: usize = 1;
pub const PER_LAYER: usize = 15;

pub const LN1_GAIN: usize = 0;
pub const LN1_BIAS: usize = 1;
pub const W_Q: usize = 2;
pub const W_K: usize = 3;
pub const W_V: usize = 4;
pub const W_O: usize = 5;
pub const REL_EMBEDDING: usize = 6;
pub const LN2_GAIN: usize = 7;
pub const LN2_BIAS: usize = 8;
pub const FFN_W1: usize = 9;
pub const FFN_B1: usize = 10;
pub const FFN_W2: usize = 11;
pub const FFN_B2: usize = 12;
pub const FFN_W3: usize = 13;
pub const FFN_B3: usize = 14;

/// All model tensors in a fixed order. Gradients and optimizer moments use
/// the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<F> {
    pub tensors: Vec<Tensor<F>>,
    layers: usize,
}

impl<F: Real> Params<F> {
    pub fn zeros(config: &ModelConfig) -> Self {
        Params {
            tensors: config
                .param_shapes()
                .iter()
                .map(|(_, s)| Tensor::zeros(s))
                .collect(),
            layers: config.layers,
        }
    }

    /// Weights drawn from N(0, 0.02); layer-norm gains 1, biases 0.
    pub fn init<R: Rng>(config: &ModelConfig, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, 0.02).expect("valid normal");
        let mut params = Self::zeros(config);
        for (tensor, (name, _)) in params.tensors.iter_mut().zip(config.param_shapes()) {
            if name.ends_with("_gain") {
                tensor.data.iter_mut().for_each(|x| *x = F::one());
            } else if name.ends_with("_bias") || name.contains(".ffn_b") {
                continue;
            } else {
                for x in tensor.data.iter_mut() {
                    *x = F::lit(normal.sample(rng));
                }
            }
        }
        params
    }

    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Tensor<F>>) -> Result<Self> {
        let shapes = config.param_shapes();
        if tensors.len() != shapes.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for (t, (name, s)) in tensors.iter().zip(&shapes) {
            if &t.shape != s || t.data.len() != s.iter().product::<usize>() {
                return Err(Error::InvalidConfig(format!(
                    "tensor {name} has shape {:?}, expected {s:?}",
                    t.shape
                )));
            }
        }
        Ok(Params {
            tensors,
            layers: config.layers,
        })
    }

    #[inline]
    pub fn layer_index(&self, layer: usize, slot: usize) -> usize {
        2 + layer * PER_LAYER + slot
    }

    #[inline]
    pub fn layer(&self, layer: usize, slot: usize) -> &[F] {
        &self.tensors[self.layer_index(layer, slot)].data
    }

    #[inline]
    pub fn layer_mut(&mut self, layer: usize, slot: usize) -> &mut [F] {
        let i = self.layer_index(layer, slot);
        &mut self.tensors[i].data
    }

    pub fn final_gain_index(&self) -> usize {
        2 + self.layers * PER_LAYER
    }

    pub fn final_bias_index(&self) -> usize {
        3 + self.layers * PER_LAYER
    }

    pub fn output_bias_index(&self) -> usize {
        4 + self.layers * PER_LAYER
    }

    pub fn get(&self, index: usize) -> &[F] {
        &self.tensors[index].data
    }

    pub fn get_mut(&mut self, index: usize) -> &mut [F] {
        &mut self.tensors[index].data
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Element-wise `self += other`.
    pub fn add_assign(&mut self, other: &Params<F>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x = F::zero());
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|x| {
                let v = x.to_f64().unwrap_or(0.0);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.is_finite())
    }

    pub fn cast<G: Real>(&self) -> Params<G> {
        Params {
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
            layers: self.layers,
        }
    }
}
