//! Token-by-token decoding with cached keys and values.
//!
//! Each call to [`Decoder::push`] runs one position through every layer.
//! Mask rows come from [`MaskSpec::allows`], which only looks at roles of
//! positions already seen, so the result matches a full forward pass.

use super::forward::Model;
use super::params::*;
use super::relative::rel_index;
use super::tensor::*;
use crate::error::{Error, Result};
use crate::masks::MaskSpec;
use crate::tokenizer::Role;

pub struct Decoder<'m, F> {
    model: &'m Model<F>,
    spec: MaskSpec,
    roles: Vec<Role>,
    /// Per layer, `[position][d_model]`.
    keys: Vec<Vec<F>>,
    values: Vec<Vec<F>>,
}

impl<'m, F: Real> Decoder<'m, F> {
    pub fn new(model: &'m Model<F>, spec: MaskSpec) -> Result<Self> {
        spec.validate()?;
        let layers = model.config.layers;
        Ok(Decoder {
            model,
            spec,
            roles: Vec::new(),
            keys: vec![Vec::new(); layers],
            values: vec![Vec::new(); layers],
        })
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    /// Feeds the token at the next position and returns logits for the one
    /// after it.
    pub fn push(&mut self, id: u32, role: Role) -> Result<Vec<F>> {
        let cfg = &self.model.config;
        let t = self.roles.len();
        if t >= cfg.max_len || t >= cfg.rel_window {
            return Err(Error::SequenceTooLong {
                len: t + 1,
                max_len: cfg.max_len.min(cfg.rel_window),
            });
        }
        if id as usize >= cfg.vocab_size {
            return Err(Error::IdOutOfRange {
                id,
                vocab_size: cfg.vocab_size,
            });
        }
        self.roles.push(role);
        let d = cfg.d_model;
        let heads = cfg.heads;
        let dh = cfg.head_dim();
        let window = cfg.rel_window;
        let (h1, h2) = cfg.ffn_dims;
        let p = &self.model.params;
        let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
        let allowed: Vec<bool> = (0..=t).map(|k| self.spec.allows(&self.roles, t, k)).collect();

        let mut h: Vec<F> = (0..d)
            .map(|c| p.get(TOKEN_EMBEDDING)[id as usize * d + c] + p.get(POSITIONAL_EMBEDDING)[t * d + c])
            .collect();
        for layer in 0..cfg.layers {
            let (x1, _) = layer_norm(&h, p.layer(layer, LN1_GAIN), p.layer(layer, LN1_BIAS), d);
            let mut q = vec![F::zero(); d];
            let mut k = vec![F::zero(); d];
            let mut v = vec![F::zero(); d];
            matmul(&x1, p.layer(layer, W_Q), &mut q, 1, d, d);
            matmul(&x1, p.layer(layer, W_K), &mut k, 1, d, d);
            matmul(&x1, p.layer(layer, W_V), &mut v, 1, d, d);
            self.keys[layer].extend_from_slice(&k);
            self.values[layer].extend_from_slice(&v);
            let keys = &self.keys[layer];
            let values = &self.values[layer];
            let er_all = p.layer(layer, REL_EMBEDDING);

            let mut ctx = vec![F::zero(); d];
            let mut row = vec![F::zero(); t + 1];
            for head in 0..heads {
                let qh = &q[head * dh..(head + 1) * dh];
                let er = &er_all[head * window * dh..(head + 1) * window * dh];
                for (j, r) in row.iter_mut().enumerate() {
                    *r = if allowed[j] {
                        let kj = &keys[j * d + head * dh..j * d + (head + 1) * dh];
                        let e = rel_index(window, t - j);
                        (dot(qh, kj) + dot(qh, &er[e * dh..(e + 1) * dh])) * scale
                    } else {
                        F::zero()
                    };
                }
                masked_softmax(&mut row, &allowed);
                let ch = &mut ctx[head * dh..(head + 1) * dh];
                for (j, &pj) in row.iter().enumerate() {
                    if pj != F::zero() {
                        axpy(pj, &values[j * d + head * dh..j * d + (head + 1) * dh], ch);
                    }
                }
            }
            matmul(&ctx, p.layer(layer, W_O), &mut h, 1, d, d);

            let (x2, _) = layer_norm(&h, p.layer(layer, LN2_GAIN), p.layer(layer, LN2_BIAS), d);
            let mut a1 = p.layer(layer, FFN_B1).to_vec();
            matmul(&x2, p.layer(layer, FFN_W1), &mut a1, 1, d, h1);
            a1.iter_mut().for_each(|x| *x = x.max(F::zero()));
            let mut a2 = p.layer(layer, FFN_B2).to_vec();
            matmul(&a1, p.layer(layer, FFN_W2), &mut a2, 1, h1, h2);
            a2.iter_mut().for_each(|x| *x = x.max(F::zero()));
            let mut f = p.layer(layer, FFN_B3).to_vec();
            matmul(&a2, p.layer(layer, FFN_W3), &mut f, 1, h2, d);
            for (a, b) in h.iter_mut().zip(f) {
                *a += b;
            }
        }
        let (xf, _) = layer_norm(&h, p.get(p.final_gain_index()), p.get(p.final_bias_index()), d);
        let mut logits = p.get(p.output_bias_index()).to_vec();
        matmul_bt(&xf, p.get(TOKEN_EMBEDDING), &mut logits, 1, d, cfg.vocab_size);
        Ok(logits)
    }
}
