//! Relative position logits via skewing.
//!
//! `E_r` holds one row per relative distance, ordered so that row `W - 1`
//! is distance 0 and row `W - 1 - r` is distance `r`. For a query block of
//! length `L` only the last `L` rows matter.

use super::tensor::{dot, Real};
use crate::error::{Error, Result};

/// Row of `E_r` used for distance `dist` in a window of `window` rows.
#[inline]
pub fn rel_index(window: usize, dist: usize) -> usize {
    window - 1 - dist
}

/// `S_rel[q][k] = Q[q] . E_r[index(q - k)]` for `k <= q`, zero above the
/// diagonal. `q` is `len x dim`, `er` is `window x dim`.
///
/// The products `Q E_tail^T` go into a buffer with one leading zero column;
/// viewed as `(L + 1) x L` and with its first row dropped it is exactly the
/// lower triangle of `S_rel`.
pub fn relative_logits<F: Real>(
    q: &[F],
    er: &[F],
    len: usize,
    dim: usize,
    window: usize,
) -> Result<Vec<F>> {
    if window < len {
        return Err(Error::WindowTooSmall { window, len });
    }
    debug_assert_eq!(q.len(), len * dim);
    debug_assert_eq!(er.len(), window * dim);
    let tail = &er[(window - len) * dim..];
    let width = len + 1;
    let mut padded = vec![F::zero(); len * width];
    for i in 0..len {
        let qi = &q[i * dim..(i + 1) * dim];
        // columns left of L - 1 - i land above the diagonal, skip them
        for c in (len - 1 - i)..len {
            padded[i * width + c + 1] = dot(qi, &tail[c * dim..(c + 1) * dim]);
        }
    }
    let mut s = padded.split_off(len);
    for i in 0..len {
        for j in (i + 1)..len {
            s[i * len + j] = F::zero();
        }
    }
    Ok(s)
}

/// Gradients of [`relative_logits`]: given `d_s` (`len x len`, only the lower
/// triangle is read) returns `(d_q, d_tail)` where `d_tail` covers the last
/// `len` rows of `E_r`.
pub fn relative_logits_backward<F: Real>(
    q: &[F],
    er: &[F],
    d_s: &[F],
    len: usize,
    dim: usize,
    window: usize,
) -> (Vec<F>, Vec<F>) {
    let tail = &er[(window - len) * dim..];
    let width = len + 1;
    // undo the skew: put d_s back behind L leading zeros and read it as L x (L + 1)
    let mut padded = vec![F::zero(); len * width];
    for i in 0..len {
        for j in 0..=i {
            padded[len + i * len + j] = d_s[i * len + j];
        }
    }
    let mut d_q = vec![F::zero(); len * dim];
    let mut d_tail = vec![F::zero(); len * dim];
    for i in 0..len {
        let qi = &q[i * dim..(i + 1) * dim];
        for c in (len - 1 - i)..len {
            let g = padded[i * width + c + 1];
            if g == F::zero() {
                continue;
            }
            let row = &tail[c * dim..(c + 1) * dim];
            for (dq, &e) in d_q[i * dim..(i + 1) * dim].iter_mut().zip(row) {
                *dq += g * e;
            }
            for (de, &qv) in d_tail[c * dim..(c + 1) * dim].iter_mut().zip(qi) {
                *de += g * qv;
            }
        }
    }
    (d_q, d_tail)
}

/// Direct double loop over `(q, k)`, used as the reference.
pub fn relative_logits_naive<F: Real>(
    q: &[F],
    er: &[F],
    len: usize,
    dim: usize,
    window: usize,
) -> Result<Vec<F>> {
    if window < len {
        return Err(Error::WindowTooSmall { window, len });
    }
    let mut s = vec![F::zero(); len * len];
    for i in 0..len {
        for j in 0..=i {
            let r = rel_index(window, i - j);
            let mut acc = F::zero();
            for c in 0..dim {
                acc += q[i * dim + c] * er[r * dim + c];
            }
            s[i * len + j] = acc;
        }
    }
    Ok(s)
}
