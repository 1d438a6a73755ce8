//! Forward and backward passes of the decoder.

use rayon::prelude::*;

use super::params::*;
use super::relative::{relative_logits, relative_logits_backward};
use super::tensor::*;
use crate::error::{Error, Result};
use crate::masks::AttentionMask;

/// A transformer decoder with relative self-attention.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<F> {
    pub config: ModelConfig,
    pub params: Params<F>,
}

/// Activations kept for the backward pass of one block.
#[derive(Clone, Debug, Default)]
struct LayerCache<F> {
    norm1: NormCache<F>,
    x1: Vec<F>,
    /// Head-major `[heads][len][head_dim]`.
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// `[heads][len][len]`, zero where masked.
    probs: Vec<F>,
    ctx: Vec<F>,
    norm2: NormCache<F>,
    x2: Vec<F>,
    a1: Vec<F>,
    a2: Vec<F>,
}

/// Everything [`Model::backward`] needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<F> {
    ids: Vec<u32>,
    layers: Vec<LayerCache<F>>,
    final_norm: NormCache<F>,
    final_out: Vec<F>,
}

struct HeadOut<F> {
    ctx: Vec<F>,
    probs: Vec<F>,
}

fn split_heads<F: Real>(x: &[F], len: usize, heads: usize, dh: usize) -> Vec<F> {
    let d = heads * dh;
    let mut out = vec![F::zero(); x.len()];
    for h in 0..heads {
        for t in 0..len {
            out[(h * len + t) * dh..(h * len + t + 1) * dh]
                .copy_from_slice(&x[t * d + h * dh..t * d + (h + 1) * dh]);
        }
    }
    out
}

fn merge_heads<F: Real>(x: &[F], len: usize, heads: usize, dh: usize) -> Vec<F> {
    let d = heads * dh;
    let mut out = vec![F::zero(); x.len()];
    for h in 0..heads {
        for t in 0..len {
            out[t * d + h * dh..t * d + (h + 1) * dh]
                .copy_from_slice(&x[(h * len + t) * dh..(h * len + t + 1) * dh]);
        }
    }
    out
}

fn linear<F: Real>(x: &[F], w: &[F], b: Option<&[F]>, rows: usize, n_in: usize, n_out: usize) -> Vec<F> {
    let mut out = match b {
        Some(b) => {
            let mut o = Vec::with_capacity(rows * n_out);
            for _ in 0..rows {
                o.extend_from_slice(b);
            }
            o
        }
        None => vec![F::zero(); rows * n_out],
    };
    matmul(x, w, &mut out, rows, n_in, n_out);
    out
}

fn relu<F: Real>(x: &mut [F]) {
    for v in x {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Backward of `y = x W + b`: accumulates `dW`, `db`, returns `dx`.
#[allow(clippy::too_many_arguments)]
fn linear_backward<F: Real>(
    x: &[F],
    w: &[F],
    dy: &[F],
    dw: &mut [F],
    db: Option<&mut [F]>,
    rows: usize,
    n_in: usize,
    n_out: usize,
) -> Vec<F> {
    matmul_at(x, dy, dw, n_in, rows, n_out);
    if let Some(db) = db {
        for r in 0..rows {
            for (b, &g) in db.iter_mut().zip(&dy[r * n_out..(r + 1) * n_out]) {
                *b += g;
            }
        }
    }
    let mut dx = vec![F::zero(); rows * n_in];
    matmul_bt(dy, w, &mut dx, rows, n_out, n_in);
    dx
}

impl<F: Real> Model<F> {
    pub fn new(config: ModelConfig, params: Params<F>) -> Result<Self> {
        config.validate()?;
        Ok(Model { config, params })
    }

    pub fn init<R: rand::Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, rng);
        Ok(Model { config, params })
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::EmptySequence);
        }
        if ids.len() > self.config.max_len {
            return Err(Error::SequenceTooLong {
                len: ids.len(),
                max_len: self.config.max_len,
            });
        }
        if let Some(&id) = ids.iter().find(|&&id| id as usize >= self.config.vocab_size) {
            return Err(Error::IdOutOfRange {
                id,
                vocab_size: self.config.vocab_size,
            });
        }
        Ok(())
    }

    fn check_mask(&self, mask: &AttentionMask, len: usize) -> Result<()> {
        if mask.size() != len {
            return Err(Error::InvalidConfig(format!(
                "mask covers {} positions but the sequence has {len}",
                mask.size()
            )));
        }
        if self.config.rel_window < len {
            return Err(Error::WindowTooSmall {
                window: self.config.rel_window,
                len,
            });
        }
        Ok(())
    }

    /// Row `t` is `token_embedding[ids[t]] + positional_embedding[t]`.
    pub fn embed(&self, ids: &[u32]) -> Result<Matrix<F>> {
        self.check_ids(ids)?;
        let d = self.config.d_model;
        let tok = self.params.get(TOKEN_EMBEDDING);
        let pos = self.params.get(POSITIONAL_EMBEDDING);
        let mut out = Matrix::zeros(ids.len(), d);
        for (t, &id) in ids.iter().enumerate() {
            let row = &mut out.data[t * d..(t + 1) * d];
            let id = id as usize;
            for c in 0..d {
                row[c] = tok[id * d + c] + pos[t * d + c];
            }
        }
        Ok(out)
    }

    fn attention_heads(
        &self,
        layer: usize,
        q: &[F],
        k: &[F],
        v: &[F],
        mask: &AttentionMask,
        len: usize,
    ) -> Result<Vec<HeadOut<F>>> {
        let heads = self.config.heads;
        let dh = self.config.head_dim();
        let window = self.config.rel_window;
        let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
        let er_all = self.params.layer(layer, REL_EMBEDDING);
        (0..heads)
            .into_par_iter()
            .map(|h| {
                let qh = &q[h * len * dh..(h + 1) * len * dh];
                let kh = &k[h * len * dh..(h + 1) * len * dh];
                let vh = &v[h * len * dh..(h + 1) * len * dh];
                let er = &er_all[h * window * dh..(h + 1) * window * dh];
                let rel = relative_logits(qh, er, len, dh, window)?;
                let mut probs = vec![F::zero(); len * len];
                let mut ctx = vec![F::zero(); len * dh];
                for i in 0..len {
                    let allowed = &mask.row(i)[..=i];
                    let qi = &qh[i * dh..(i + 1) * dh];
                    let row = &mut probs[i * len..i * len + i + 1];
                    for (j, r) in row.iter_mut().enumerate() {
                        if allowed[j] {
                            *r = (dot(qi, &kh[j * dh..(j + 1) * dh]) + rel[i * len + j]) * scale;
                        }
                    }
                    masked_softmax(row, allowed);
                    let ci = &mut ctx[i * dh..(i + 1) * dh];
                    for (j, &p) in row.iter().enumerate() {
                        if p != F::zero() {
                            axpy(p, &vh[j * dh..(j + 1) * dh], ci);
                        }
                    }
                }
                Ok(HeadOut { ctx, probs })
            })
            .collect()
    }

    /// Pre-norm self-attention block with residual: `H + MHA(LN(H))`.
    fn attention_block(
        &self,
        layer: usize,
        h: &[F],
        mask: &AttentionMask,
        len: usize,
        cache: Option<&mut LayerCache<F>>,
    ) -> Result<Vec<F>> {
        let d = self.config.d_model;
        let heads = self.config.heads;
        let dh = self.config.head_dim();
        let p = &self.params;
        let (x1, norm1) = layer_norm(h, p.layer(layer, LN1_GAIN), p.layer(layer, LN1_BIAS), d);
        let q = split_heads(&linear(&x1, p.layer(layer, W_Q), None, len, d, d), len, heads, dh);
        let k = split_heads(&linear(&x1, p.layer(layer, W_K), None, len, d, d), len, heads, dh);
        let v = split_heads(&linear(&x1, p.layer(layer, W_V), None, len, d, d), len, heads, dh);
        let outs = self.attention_heads(layer, &q, &k, &v, mask, len)?;
        let mut ctx_heads = Vec::with_capacity(len * d);
        for o in &outs {
            ctx_heads.extend_from_slice(&o.ctx);
        }
        let ctx = merge_heads(&ctx_heads, len, heads, dh);
        let mut s = h.to_vec();
        matmul(&ctx, p.layer(layer, W_O), &mut s, len, d, d);
        if let Some(c) = cache {
            c.norm1 = norm1;
            c.x1 = x1;
            c.q = q;
            c.k = k;
            c.v = v;
            c.probs = outs.into_iter().flat_map(|o| o.probs).collect();
            c.ctx = ctx;
        }
        Ok(s)
    }

    /// `S + FFN(LN(S))` with two ReLU hidden layers.
    fn ffn_block(
        &self,
        layer: usize,
        s: &[F],
        len: usize,
        cache: Option<&mut LayerCache<F>>,
    ) -> Vec<F> {
        let d = self.config.d_model;
        let (h1, h2) = self.config.ffn_dims;
        let p = &self.params;
        let (x2, norm2) = layer_norm(s, p.layer(layer, LN2_GAIN), p.layer(layer, LN2_BIAS), d);
        let mut a1 = linear(&x2, p.layer(layer, FFN_W1), Some(p.layer(layer, FFN_B1)), len, d, h1);
        relu(&mut a1);
        let mut a2 = linear(&a1, p.layer(layer, FFN_W2), Some(p.layer(layer, FFN_B2)), len, h1, h2);
        relu(&mut a2);
        let mut out = s.to_vec();
        let f = linear(&a2, p.layer(layer, FFN_W3), Some(p.layer(layer, FFN_B3)), len, h2, d);
        for (o, x) in out.iter_mut().zip(f) {
            *o += x;
        }
        if let Some(c) = cache {
            c.norm2 = norm2;
            c.x2 = x2;
            c.a1 = a1;
            c.a2 = a2;
        }
        out
    }

    /// One attention sub-layer of block `layer` applied to `h`, residual
    /// included.
    pub fn attention_layer(
        &self,
        layer: usize,
        h: &Matrix<F>,
        mask: &AttentionMask,
    ) -> Result<Matrix<F>> {
        if h.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput("attention input"));
        }
        if h.cols != self.config.d_model || layer >= self.config.layers {
            return Err(Error::InvalidConfig("attention input does not fit the model".into()));
        }
        self.check_mask(mask, h.rows)?;
        let data = self.attention_block(layer, &h.data, mask, h.rows, None)?;
        Ok(Matrix {
            rows: h.rows,
            cols: h.cols,
            data,
        })
    }

    fn output_logits(&self, xf: &[F], len: usize) -> Matrix<F> {
        let d = self.config.d_model;
        let vocab = self.config.vocab_size;
        let bias = self.params.get(self.params.output_bias_index());
        let mut logits = Matrix::zeros(len, vocab);
        for t in 0..len {
            logits.data[t * vocab..(t + 1) * vocab].copy_from_slice(bias);
        }
        matmul_bt(xf, self.params.get(TOKEN_EMBEDDING), &mut logits.data, len, d, vocab);
        logits
    }

    fn run(&self, ids: &[u32], mask: &AttentionMask, keep: bool) -> Result<(Matrix<F>, Option<ForwardCache<F>>)> {
        let len = ids.len();
        let mut h = self.embed(ids)?.data;
        self.check_mask(mask, len)?;
        let d = self.config.d_model;
        let mut caches = Vec::new();
        for layer in 0..self.config.layers {
            let mut cache = keep.then(LayerCache::default);
            let s = self.attention_block(layer, &h, mask, len, cache.as_mut())?;
            h = self.ffn_block(layer, &s, len, cache.as_mut());
            if let Some(c) = cache {
                caches.push(c);
            }
        }
        let p = &self.params;
        let (xf, final_norm) = layer_norm(
            &h,
            p.get(p.final_gain_index()),
            p.get(p.final_bias_index()),
            d,
        );
        let logits = self.output_logits(&xf, len);
        let cache = keep.then(|| ForwardCache {
            ids: ids.to_vec(),
            layers: caches,
            final_norm,
            final_out: xf,
        });
        Ok((logits, cache))
    }

    /// `L x vocab` logits; row `t` scores the token at position `t + 1`.
    pub fn forward(&self, ids: &[u32], mask: &AttentionMask) -> Result<Matrix<F>> {
        Ok(self.run(ids, mask, false)?.0)
    }

    pub fn forward_with_cache(
        &self,
        ids: &[u32],
        mask: &AttentionMask,
    ) -> Result<(Matrix<F>, ForwardCache<F>)> {
        let (logits, cache) = self.run(ids, mask, true)?;
        Ok((logits, cache.expect("cache requested")))
    }

    /// Accumulates into `grads` the gradient of `sum(d_logits * logits)`.
    pub fn backward(&self, cache: &ForwardCache<F>, d_logits: &[F], grads: &mut Params<F>) {
        let len = cache.ids.len();
        let d = self.config.d_model;
        let vocab = self.config.vocab_size;
        let p = &self.params;

        let ob = grads.output_bias_index();
        for t in 0..len {
            for (g, &x) in grads.get_mut(ob).iter_mut().zip(&d_logits[t * vocab..(t + 1) * vocab]) {
                *g += x;
            }
        }
        matmul_at(d_logits, &cache.final_out, grads.get_mut(TOKEN_EMBEDDING), vocab, len, d);
        let mut dxf = vec![F::zero(); len * d];
        matmul(d_logits, p.get(TOKEN_EMBEDDING), &mut dxf, len, vocab, d);

        let (gi, bi) = (grads.final_gain_index(), grads.final_bias_index());
        let (mut dg, mut db) = (vec![F::zero(); d], vec![F::zero(); d]);
        let mut dh = layer_norm_backward(&dxf, &cache.final_norm, p.get(p.final_gain_index()), &mut dg, &mut db, d);
        accumulate(grads.get_mut(gi), &dg);
        accumulate(grads.get_mut(bi), &db);

        for layer in (0..self.config.layers).rev() {
            dh = self.layer_backward(layer, &cache.layers[layer], &dh, len, grads);
        }

        for (t, &id) in cache.ids.iter().enumerate() {
            let row = &dh[t * d..(t + 1) * d];
            let id = id as usize;
            accumulate(&mut grads.get_mut(TOKEN_EMBEDDING)[id * d..(id + 1) * d], row);
            accumulate(&mut grads.get_mut(POSITIONAL_EMBEDDING)[t * d..(t + 1) * d], row);
        }
    }

    fn layer_backward(
        &self,
        layer: usize,
        c: &LayerCache<F>,
        d_out: &[F],
        len: usize,
        grads: &mut Params<F>,
    ) -> Vec<F> {
        let d = self.config.d_model;
        let (h1, h2) = self.config.ffn_dims;
        let heads = self.config.heads;
        let dh = self.config.head_dim();
        let window = self.config.rel_window;
        let p = &self.params;

        // feed-forward
        let mut tmp_w = vec![F::zero(); h2 * d];
        let mut tmp_b = vec![F::zero(); d];
        let mut da2 = linear_backward(&c.a2, p.layer(layer, FFN_W3), d_out, &mut tmp_w, Some(&mut tmp_b), len, h2, d);
        accumulate(grads.layer_mut(layer, FFN_W3), &tmp_w);
        accumulate(grads.layer_mut(layer, FFN_B3), &tmp_b);
        relu_backward(&mut da2, &c.a2);

        let mut tmp_w = vec![F::zero(); h1 * h2];
        let mut tmp_b = vec![F::zero(); h2];
        let mut da1 = linear_backward(&c.a1, p.layer(layer, FFN_W2), &da2, &mut tmp_w, Some(&mut tmp_b), len, h1, h2);
        accumulate(grads.layer_mut(layer, FFN_W2), &tmp_w);
        accumulate(grads.layer_mut(layer, FFN_B2), &tmp_b);
        relu_backward(&mut da1, &c.a1);

        let mut tmp_w = vec![F::zero(); d * h1];
        let mut tmp_b = vec![F::zero(); h1];
        let dx2 = linear_backward(&c.x2, p.layer(layer, FFN_W1), &da1, &mut tmp_w, Some(&mut tmp_b), len, d, h1);
        accumulate(grads.layer_mut(layer, FFN_W1), &tmp_w);
        accumulate(grads.layer_mut(layer, FFN_B1), &tmp_b);

        let (mut dg, mut db) = (vec![F::zero(); d], vec![F::zero(); d]);
        let dn2 = layer_norm_backward(&dx2, &c.norm2, p.layer(layer, LN2_GAIN), &mut dg, &mut db, d);
        accumulate(grads.layer_mut(layer, LN2_GAIN), &dg);
        accumulate(grads.layer_mut(layer, LN2_BIAS), &db);
        let mut ds = d_out.to_vec();
        accumulate(&mut ds, &dn2);

        // attention
        let mut tmp_w = vec![F::zero(); d * d];
        let dctx = linear_backward(&c.ctx, p.layer(layer, W_O), &ds, &mut tmp_w, None, len, d, d);
        accumulate(grads.layer_mut(layer, W_O), &tmp_w);
        let dctx = split_heads(&dctx, len, heads, dh);

        let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
        let er_all = p.layer(layer, REL_EMBEDDING);
        let per_head: Vec<(Vec<F>, Vec<F>, Vec<F>, Vec<F>)> = (0..heads)
            .into_par_iter()
            .map(|h| {
                let o = h * len * dh;
                let (qh, kh, vh) = (&c.q[o..o + len * dh], &c.k[o..o + len * dh], &c.v[o..o + len * dh]);
                let dctx_h = &dctx[o..o + len * dh];
                let probs = &c.probs[h * len * len..(h + 1) * len * len];
                let mut dq = vec![F::zero(); len * dh];
                let mut dk = vec![F::zero(); len * dh];
                let mut dv = vec![F::zero(); len * dh];
                let mut dz = vec![F::zero(); len * len];
                for i in 0..len {
                    let gi = &dctx_h[i * dh..(i + 1) * dh];
                    let prow = &probs[i * len..i * len + i + 1];
                    let mut dp = vec![F::zero(); i + 1];
                    let mut weighted = F::zero();
                    for (j, &pij) in prow.iter().enumerate() {
                        if pij != F::zero() {
                            dp[j] = dot(gi, &vh[j * dh..(j + 1) * dh]);
                            weighted += pij * dp[j];
                            axpy(pij, gi, &mut dv[j * dh..(j + 1) * dh]);
                        }
                    }
                    let qi = &qh[i * dh..(i + 1) * dh];
                    for (j, &pij) in prow.iter().enumerate() {
                        if pij != F::zero() {
                            let g = pij * (dp[j] - weighted) * scale;
                            dz[i * len + j] = g;
                            axpy(g, &kh[j * dh..(j + 1) * dh], &mut dq[i * dh..(i + 1) * dh]);
                            axpy(g, qi, &mut dk[j * dh..(j + 1) * dh]);
                        }
                    }
                }
                let er = &er_all[h * window * dh..(h + 1) * window * dh];
                let (dq_rel, d_tail) = relative_logits_backward(qh, er, &dz, len, dh, window);
                accumulate(&mut dq, &dq_rel);
                (dq, dk, dv, d_tail)
            })
            .collect();

        let mut dq = Vec::with_capacity(len * d);
        let mut dk = Vec::with_capacity(len * d);
        let mut dv = Vec::with_capacity(len * d);
        {
            let der = grads.layer_mut(layer, REL_EMBEDDING);
            for (h, (q, k, v, tail)) in per_head.into_iter().enumerate() {
                dq.extend(q);
                dk.extend(k);
                dv.extend(v);
                let start = (h * window + window - len) * dh;
                accumulate(&mut der[start..start + len * dh], &tail);
            }
        }
        let dq = merge_heads(&dq, len, heads, dh);
        let dk = merge_heads(&dk, len, heads, dh);
        let dv = merge_heads(&dv, len, heads, dh);

        let mut dx1 = vec![F::zero(); len * d];
        for (slot, g) in [(W_Q, &dq), (W_K, &dk), (W_V, &dv)] {
            let mut tmp_w = vec![F::zero(); d * d];
            let dx = linear_backward(&c.x1, p.layer(layer, slot), g, &mut tmp_w, None, len, d, d);
            accumulate(grads.layer_mut(layer, slot), &tmp_w);
            accumulate(&mut dx1, &dx);
        }
        let (mut dg, mut db) = (vec![F::zero(); d], vec![F::zero(); d]);
        let dn1 = layer_norm_backward(&dx1, &c.norm1, p.layer(layer, LN1_GAIN), &mut dg, &mut db, d);
        accumulate(grads.layer_mut(layer, LN1_GAIN), &dg);
        accumulate(grads.layer_mut(layer, LN1_BIAS), &db);
        let mut dh_prev = ds;
        accumulate(&mut dh_prev, &dn1);
        dh_prev
    }
}

#[inline]
fn accumulate<F: Real>(dst: &mut [F], src: &[F]) {
    for (a, &b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

fn relu_backward<F: Real>(grad: &mut [F], activation: &[F]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= F::zero() {
            *g = F::zero();
        }
    }
}

/// Softmax cross-entropy of `logits` (one row) against `target`. Returns the
/// loss and writes `softmax - onehot` into `grad`.
pub fn cross_entropy<F: Real>(logits: &[F], target: usize, grad: &mut [F]) -> F {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for (g, &l) in grad.iter_mut().zip(logits) {
        *g = (l - max).exp();
        sum += *g;
    }
    for g in grad.iter_mut() {
        *g /= sum;
    }
    let loss = -(logits[target] - max - sum.ln());
    grad[target] -= F::one();
    loss
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax<F: Real>(row: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::{full_causal_mask, pattern_roles};
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn micro() -> ModelConfig {
        ModelConfig {
            layers: 2,
            d_model: 8,
            heads: 2,
            ffn_dims: (12, 6),
            vocab_size: 20,
            max_len: 6,
            rel_window: 6,
        }
    }

    #[test]
    fn logits_shape() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let model: Model<f64> = Model::init(micro(), &mut rng).unwrap();
        let ids = [1, 2, 3, 4];
        let logits = model.forward(&ids, &full_causal_mask(&pattern_roles(4))).unwrap();
        assert_eq!((logits.rows, logits.cols), (4, 20));
    }

    #[test]
    fn embed_checks() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let model: Model<f64> = Model::init(micro(), &mut rng).unwrap();
        assert!(matches!(model.embed(&[0; 7]), Err(Error::SequenceTooLong { len: 7, max_len: 6 })));
        assert!(matches!(model.embed(&[20]), Err(Error::IdOutOfRange { id: 20, .. })));
        let e = model.embed(&[5]).unwrap();
        let d = 8;
        for c in 0..d {
            let expected = model.params.get(TOKEN_EMBEDDING)[5 * d + c]
                + model.params.get(POSITIONAL_EMBEDDING)[c];
            assert_eq!(e.get(0, c), expected);
        }
    }

    #[test]
    fn zero_value_path_is_identity() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        let mut model: Model<f64> = Model::init(micro(), &mut rng).unwrap();
        model.params.layer_mut(0, W_V).fill(0.0);
        model.params.layer_mut(0, W_O).fill(0.0);
        let h = Matrix {
            rows: 3,
            cols: 8,
            data: (0..24).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let out = model.attention_layer(0, &h, &full_causal_mask(&pattern_roles(3))).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn only_output_bias_gives_constant_logits() {
        let mut model: Model<f64> = Model::new(micro(), Params::zeros(&micro())).unwrap();
        let ob = model.params.output_bias_index();
        for (i, b) in model.params.get_mut(ob).iter_mut().enumerate() {
            *b = i as f64 * 0.1;
        }
        let logits = model.forward(&[1, 5, 9], &full_causal_mask(&pattern_roles(3))).unwrap();
        for t in 1..3 {
            assert_eq!(logits.row(t), logits.row(0));
        }
    }

    #[test]
    fn cross_entropy_uniform() {
        let mut g = vec![0.0; 725];
        let loss = cross_entropy(&vec![0.3f64; 725], 7, &mut g);
        assert!((loss - (725f64).ln()).abs() < 1e-12);
    }
}
