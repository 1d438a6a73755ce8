//! Row-major dense kernels used by the transformer.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

/// Scalar type of the model: `f32` for training, `f64` for gradient checks.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// An n-dimensional array with row-major storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F> {
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: F) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|x| G::from_f64(x.to_f64().unwrap_or(0.0)).unwrap_or_else(G::zero))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// A 2-D view returned to callers (logits, hidden states).
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }
}

/// Dot product with eight independent accumulators so it vectorizes.
#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let tail: F = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(&x, &y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for i in 0..8 {
            acc[i] += ca[i] * cb[i];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub fn axpy<F: Real>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out (m x n) += a (m x k) * b (k x n)`.
pub fn matmul<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av != F::zero() {
                axpy(av, &b[p * n..(p + 1) * n], orow);
            }
        }
    }
}

/// `out (m x n) += a (m x k) * b^T` where `b` is `n x k`.
pub fn matmul_bt<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (j, o) in orow.iter_mut().enumerate() {
            *o += dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `out (m x n) += a^T * b` where `a` is `k x m` and `b` is `k x n`.
pub fn matmul_at<F: Real>(a: &[F], b: &[F], out: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av != F::zero() {
                axpy(av, brow, &mut out[i * n..(i + 1) * n]);
            }
        }
    }
}

/// Copies columns `[col, col + width)` of an `rows x cols` matrix.
pub fn take_columns<F: Real>(src: &[F], rows: usize, cols: usize, col: usize, width: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(rows * width);
    for r in 0..rows {
        out.extend_from_slice(&src[r * cols + col..r * cols + col + width]);
    }
    out
}

/// Adds a `rows x width` block into columns `[col, col + width)` of `dst`.
pub fn add_columns<F: Real>(dst: &mut [F], rows: usize, cols: usize, col: usize, block: &[F]) {
    let width = block.len() / rows.max(1);
    for r in 0..rows {
        for (d, &b) in dst[r * cols + col..r * cols + col + width]
            .iter_mut()
            .zip(&block[r * width..(r + 1) * width])
        {
            *d += b;
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row statistics kept for the layer-norm backward pass.
#[derive(Clone, Debug, Default)]
pub struct NormCache<F> {
    pub xhat: Vec<F>,
    pub rstd: Vec<F>,
}

/// Row-wise layer norm of an `rows x d` matrix.
pub fn layer_norm<F: Real>(x: &[F], gain: &[F], bias: &[F], d: usize) -> (Vec<F>, NormCache<F>) {
    let rows = x.len() / d;
    let mut out = vec![F::zero(); x.len()];
    let mut cache = NormCache {
        xhat: vec![F::zero(); x.len()],
        rstd: vec![F::zero(); rows],
    };
    let inv_d = F::one() / F::from_usize(d).unwrap();
    let eps = F::lit(LAYER_NORM_EPS);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<F>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_d;
        let rstd = F::one() / (var + eps).sqrt();
        cache.rstd[r] = rstd;
        for c in 0..d {
            let xh = (row[c] - mean) * rstd;
            cache.xhat[r * d + c] = xh;
            out[r * d + c] = xh * gain[c] + bias[c];
        }
    }
    (out, cache)
}

/// Backward of [`layer_norm`]. Accumulates parameter gradients and returns
/// the gradient with respect to the input.
pub fn layer_norm_backward<F: Real>(
    dy: &[F],
    cache: &NormCache<F>,
    gain: &[F],
    d_gain: &mut [F],
    d_bias: &mut [F],
    d: usize,
) -> Vec<F> {
    let rows = dy.len() / d;
    let mut dx = vec![F::zero(); dy.len()];
    let inv_d = F::one() / F::from_usize(d).unwrap();
    let mut dxhat = vec![F::zero(); d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxhat = F::zero();
        let mut mean_dxhat_xhat = F::zero();
        for c in 0..d {
            d_gain[c] += dyr[c] * xh[c];
            d_bias[c] += dyr[c];
            dxhat[c] = dyr[c] * gain[c];
            mean_dxhat += dxhat[c];
            mean_dxhat_xhat += dxhat[c] * xh[c];
        }
        mean_dxhat *= inv_d;
        mean_dxhat_xhat *= inv_d;
        let rstd = cache.rstd[r];
        for c in 0..d {
            dx[r * d + c] = rstd * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
    dx
}

/// In-place softmax over the entries of `row` where `allowed` is true; the
/// rest become zero. At least one entry must be allowed.
pub fn masked_softmax<F: Real>(row: &mut [F], allowed: &[bool]) {
    let mut max = F::neg_infinity();
    for (&v, &a) in row.iter().zip(allowed) {
        if a && v > max {
            max = v;
        }
    }
    let mut sum = F::zero();
    for (v, &a) in row.iter_mut().zip(allowed) {
        *v = if a { (*v - max).exp() } else { F::zero() };
        sum += *v;
    }
    let inv = F::one() / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}
