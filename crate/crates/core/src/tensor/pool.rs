//! Non-overlapping pooling along the last axis. Trailing elements that do not
//! fill a whole window are dropped by pooling and never recreated by unpooling.

use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Average,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub window: usize,
    pub mode: PoolMode,
}

pub fn pooled_len(in_len: usize, window: usize) -> Result<usize> {
    if window < 2 {
        return Err(Error::Config(format!(
            "pool window must be ≥ 2, got {window}"
        )));
    }
    if in_len < window {
        return Err(Error::Config(format!(
            "pool window {window} exceeds input length {in_len}"
        )));
    }
    Ok(in_len / window)
}

fn with_last<T: Scalar>(x: &Tensor<T>, len: usize, data: Vec<T>) -> Tensor<T> {
    let mut shape = x.shape().to_vec();
    *shape.last_mut().expect("tensor has ≥ 1 axis") = len;
    Tensor::new(&shape, data).expect("pool output extent")
}

fn last_len<T: Scalar>(x: &Tensor<T>) -> usize {
    *x.shape().last().expect("tensor has ≥ 1 axis")
}

pub fn avg_pool1d<T: Scalar>(x: &Tensor<T>, window: usize) -> Result<Tensor<T>> {
    let len = last_len(x);
    let out_len = pooled_len(len, window)?;
    let scale = T::one() / T::from_f64(window as f64);
    let mut out = Vec::with_capacity(x.len() / len * out_len);
    for row in x.data().chunks_exact(len) {
        for w in row[..out_len * window].chunks_exact(window) {
            out.push(w.iter().fold(T::zero(), |s, &v| s + v) * scale);
        }
    }
    Ok(with_last(x, out_len, out))
}

/// Adjoint of [`avg_pool1d`] for an input whose last axis had length `in_len`.
pub fn avg_pool1d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    in_len: usize,
    window: usize,
) -> Result<Tensor<T>> {
    let out_len = pooled_len(in_len, window)?;
    if last_len(grad_out) != out_len {
        return Err(Error::State(format!(
            "avg pool gradient has length {}, expected {out_len}",
            last_len(grad_out)
        )));
    }
    let scale = T::one() / T::from_f64(window as f64);
    let mut gx = Vec::with_capacity(grad_out.len() / out_len * in_len);
    for row in grad_out.data().chunks_exact(out_len) {
        for &g in row {
            gx.extend(std::iter::repeat_n(g * scale, window));
        }
        gx.extend(std::iter::repeat_n(T::zero(), in_len - out_len * window));
    }
    Ok(with_last(grad_out, in_len, gx))
}

/// Replicate every value `window` times.
pub fn avg_unpool1d<T: Scalar>(x: &Tensor<T>, window: usize) -> Result<Tensor<T>> {
    if window < 2 {
        return Err(Error::Config(format!(
            "pool window must be ≥ 2, got {window}"
        )));
    }
    let len = last_len(x);
    let mut out = Vec::with_capacity(x.len() * window);
    for &v in x.data() {
        out.extend(std::iter::repeat_n(v, window));
    }
    Ok(with_last(x, len * window, out))
}

/// Adjoint of [`avg_unpool1d`]: window sums.
pub fn avg_unpool1d_backward<T: Scalar>(grad_out: &Tensor<T>, window: usize) -> Result<Tensor<T>> {
    let len = last_len(grad_out);
    if window < 2 || !len.is_multiple_of(window) {
        return Err(Error::State(format!(
            "unpool gradient length {len} is not a multiple of window {window}"
        )));
    }
    let data = grad_out
        .data()
        .chunks_exact(window)
        .map(|w| w.iter().fold(T::zero(), |s, &v| s + v))
        .collect();
    Ok(with_last(grad_out, len / window, data))
}

/// Winning positions recorded by [`max_pool1d`], one per pooled value.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxPoolCache {
    argmax: Vec<usize>,
    in_len: usize,
    window: usize,
}

impl MaxPoolCache {
    pub fn window(&self) -> usize {
        self.window
    }

    /// Offsets inside each row's input, ordered as the pooled output.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }

    fn out_len(&self) -> usize {
        self.in_len / self.window
    }

    fn check(&self, len: usize, total: usize) -> Result<()> {
        if len != self.out_len() || total != self.argmax.len() {
            return Err(Error::State(format!(
                "max-pool cache records {} values of row length {}, got {total} values of row length {len}",
                self.argmax.len(),
                self.out_len()
            )));
        }
        Ok(())
    }
}

/// Ties resolve to the lowest index in the window.
pub fn max_pool1d<T: Scalar>(x: &Tensor<T>, window: usize) -> Result<(Tensor<T>, MaxPoolCache)> {
    let len = last_len(x);
    let out_len = pooled_len(len, window)?;
    let mut out = Vec::with_capacity(x.len() / len * out_len);
    let mut argmax = Vec::with_capacity(out.capacity());
    for row in x.data().chunks_exact(len) {
        for (wi, w) in row[..out_len * window].chunks_exact(window).enumerate() {
            let mut best = 0;
            for (i, &v) in w.iter().enumerate().skip(1) {
                if v > w[best] {
                    best = i;
                }
            }
            out.push(w[best]);
            argmax.push(wi * window + best);
        }
    }
    Ok((
        with_last(x, out_len, out),
        MaxPoolCache {
            argmax,
            in_len: len,
            window,
        },
    ))
}

pub fn max_pool1d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &MaxPoolCache,
) -> Result<Tensor<T>> {
    cache.check(last_len(grad_out), grad_out.len())?;
    let out_len = cache.out_len();
    let mut gx = vec![T::zero(); grad_out.len() / out_len.max(1) * cache.in_len];
    for (r, row) in grad_out.data().chunks_exact(out_len).enumerate() {
        for (j, &g) in row.iter().enumerate() {
            let idx = r * cache.in_len + cache.argmax[r * out_len + j];
            gx[idx] = gx[idx] + g;
        }
    }
    Ok(with_last(grad_out, cache.in_len, gx))
}

/// Place every value at its recorded argmax, zeros elsewhere. The output row
/// length is `pooled_len · window`.
pub fn max_unpool1d<T: Scalar>(x: &Tensor<T>, cache: &MaxPoolCache) -> Result<Tensor<T>> {
    cache.check(last_len(x), x.len())?;
    let out_len = cache.out_len();
    let full = out_len * cache.window;
    let mut out = vec![T::zero(); x.len() / out_len.max(1) * full];
    for (r, row) in x.data().chunks_exact(out_len).enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[r * full + cache.argmax[r * out_len + j]] = v;
        }
    }
    Ok(with_last(x, full, out))
}

pub fn max_unpool1d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &MaxPoolCache,
) -> Result<Tensor<T>> {
    let out_len = cache.out_len();
    let full = out_len * cache.window;
    if last_len(grad_out) != full || grad_out.len() / full.max(1) * out_len != cache.argmax.len() {
        return Err(Error::State(format!(
            "max-unpool gradient shape {:?} does not match cache",
            grad_out.shape()
        )));
    }
    let mut gx = Vec::with_capacity(cache.argmax.len());
    for (r, row) in grad_out.data().chunks_exact(full).enumerate() {
        for j in 0..out_len {
            gx.push(row[cache.argmax[r * out_len + j]]);
        }
    }
    Ok(with_last(grad_out, out_len, gx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(v.to_vec())
    }

    #[test]
    fn average_of_pairs() {
        assert_eq!(
            avg_pool1d(&t(&[1.0, 3.0, 2.0, 6.0]), 2).unwrap().data(),
            &[2.0, 4.0]
        );
    }

    #[test]
    fn constant_survives_round_trip() {
        let x = t(&[2.5; 6]);
        let p = avg_pool1d(&x, 3).unwrap();
        assert_eq!(p.data(), &[2.5, 2.5]);
        assert_eq!(avg_unpool1d(&p, 3).unwrap(), x);
    }

    #[test]
    fn remainder_is_dropped() {
        let x = t(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let p = avg_pool1d(&x, 2).unwrap();
        assert_eq!(p.data(), &[1.5, 3.5]);
        assert_eq!(avg_unpool1d(&p, 2).unwrap().len(), 4);
        let g = avg_pool1d_backward(&t(&[1.0, 1.0]), 5, 2).unwrap();
        assert_eq!(g.data(), &[0.5, 0.5, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn window_larger_than_input() {
        assert!(matches!(avg_pool1d(&t(&[1.0]), 2), Err(Error::Config(_))));
        assert!(matches!(
            max_pool1d(&t(&[1.0, 2.0]), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn max_pool_and_scatter() {
        let (p, cache) = max_pool1d(&t(&[1.0, 3.0, 2.0, 6.0]), 2).unwrap();
        assert_eq!(p.data(), &[3.0, 6.0]);
        assert_eq!(
            max_unpool1d(&p, &cache).unwrap().data(),
            &[0.0, 3.0, 0.0, 6.0]
        );
    }

    #[test]
    fn ties_pick_first_index() {
        let (_, cache) = max_pool1d(&t(&[4.0; 6]), 3).unwrap();
        assert_eq!(cache.argmax(), &[0, 3]);
    }

    #[test]
    fn mismatched_cache_is_state_error() {
        let (_, cache) = max_pool1d(&t(&[1.0, 3.0, 2.0, 6.0]), 2).unwrap();
        assert!(matches!(
            max_unpool1d(&t(&[1.0, 2.0, 3.0]), &cache),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn batched_rows_pool_independently() {
        let x = Tensor::new(&[2, 1, 4], vec![1.0, 3.0, 2.0, 6.0, -1.0, -3.0, 0.0, 8.0]).unwrap();
        let (p, cache) = max_pool1d(&x, 2).unwrap();
        assert_eq!(p.shape(), &[2, 1, 2]);
        assert_eq!(p.data(), &[3.0, 6.0, -1.0, 8.0]);
        let u = max_unpool1d(&p, &cache).unwrap();
        assert_eq!(u.data(), &[0.0, 3.0, 0.0, 6.0, -1.0, 0.0, 0.0, 8.0]);
    }
}
