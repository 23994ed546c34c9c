//! Strided 1-D convolution along the time axis and its transpose.
//!
//! Both kernels lower to matrix products through an im2col buffer whose rows
//! are indexed by `(channel, tap)` and whose columns are output positions.

use super::{gemm, Activation, MatRef, Scalar, Tensor};
use crate::error::{Error, Result};

/// Unfold a `channels × len` signal into a `(channels·kernel) × out_len` matrix.
fn im2col<T: Scalar>(
    x: &[T],
    channels: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_len: usize,
) -> Vec<T> {
    let mut cols = vec![T::zero(); channels * kernel * out_len];
    for c in 0..channels {
        let signal = &x[c * len..(c + 1) * len];
        for u in 0..kernel {
            let row = &mut cols[(c * kernel + u) * out_len..(c * kernel + u + 1) * out_len];
            for (j, slot) in row.iter_mut().enumerate() {
                let pos = (j * stride + u) as isize - padding as isize;
                if pos >= 0 && (pos as usize) < len {
                    *slot = signal[pos as usize];
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add columns back into a `channels × len` signal.
#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(
    cols: &[T],
    channels: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_len: usize,
    x: &mut [T],
) {
    for c in 0..channels {
        let signal = &mut x[c * len..(c + 1) * len];
        for u in 0..kernel {
            let row = &cols[(c * kernel + u) * out_len..(c * kernel + u + 1) * out_len];
            for (j, &v) in row.iter().enumerate() {
                let pos = (j * stride + u) as isize - padding as isize;
                if pos >= 0 && (pos as usize) < len {
                    signal[pos as usize] = signal[pos as usize] + v;
                }
            }
        }
    }
}

/// Interpret `x` as `[batch, channels, len]`, promoting a 2-axis input to a batch of one.
fn batch_dims<T: Scalar>(
    x: &Tensor<T>,
    channels: usize,
    context: &'static str,
) -> Result<(usize, usize, bool)> {
    let shape = x.batched(3);
    if shape.len() != 3 || shape[1] != channels {
        return Err(Error::dim(context, &[channels], x.shape()));
    }
    Ok((shape[0], shape[2], x.shape().len() == 2))
}

fn output_tensor<T: Scalar>(
    batch: usize,
    channels: usize,
    len: usize,
    unbatched: bool,
    data: Vec<T>,
) -> Tensor<T> {
    let shape: Vec<usize> = if unbatched {
        vec![channels, len]
    } else {
        vec![batch, channels, len]
    };
    Tensor::new(&shape, data).expect("conv output extent")
}

/// Convolution layer: `filters` is `n_filters × in_channels × kernel_len`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dLayer<T> {
    pub filters: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct Conv1dCache<T> {
    cols: Vec<T>,
    pre: Tensor<T>,
    in_len: usize,
    unbatched: bool,
}

/// Gradients of either convolution flavour. `input` is `None` when the caller
/// asked to skip the input adjoint (first layer of a network).
#[derive(Clone, Debug)]
pub struct Conv1dGrads<T> {
    pub input: Option<Tensor<T>>,
    pub filters: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Conv1dLayer<T> {
    pub fn new(
        filters: Tensor<T>,
        bias: Tensor<T>,
        stride: usize,
        padding: usize,
        activation: Activation,
    ) -> Result<Self> {
        if filters.shape().len() != 3 || filters.shape()[2] == 0 {
            return Err(Error::Config(
                "conv filters must be n_filters × in_channels × kernel_len, kernel_len ≥ 1".into(),
            ));
        }
        if stride == 0 {
            return Err(Error::Config("conv stride must be ≥ 1".into()));
        }
        if bias.shape() != [filters.shape()[0]] {
            return Err(Error::dim("conv bias", &[filters.shape()[0]], bias.shape()));
        }
        Ok(Conv1dLayer {
            filters,
            bias,
            stride,
            padding,
            activation,
        })
    }

    pub fn n_filters(&self) -> usize {
        self.filters.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.filters.shape()[1]
    }

    pub fn kernel_len(&self) -> usize {
        self.filters.shape()[2]
    }

    pub fn output_len(&self, in_len: usize) -> Result<usize> {
        conv_output_len(in_len, self.kernel_len(), self.stride, self.padding)
    }

    fn pre_activation(&self, x: &Tensor<T>, keep_cols: bool) -> Result<(Vec<T>, Vec<T>, ConvDims)> {
        let (batch, len, unbatched) = batch_dims(x, self.in_channels(), "conv1d input channels")?;
        let out_len = self.output_len(len)?;
        let (f, ck) = (self.n_filters(), self.in_channels() * self.kernel_len());
        let mut pre = vec![T::zero(); batch * f * out_len];
        let mut all_cols = Vec::with_capacity(if keep_cols { batch * ck * out_len } else { 0 });
        for b in 0..batch {
            let xb = &x.data()[b * self.in_channels() * len..(b + 1) * self.in_channels() * len];
            let cols = im2col(
                xb,
                self.in_channels(),
                len,
                self.kernel_len(),
                self.stride,
                self.padding,
                out_len,
            );
            let out = &mut pre[b * f * out_len..(b + 1) * f * out_len];
            for (row, &bk) in out.chunks_exact_mut(out_len).zip(self.bias.data()) {
                row.fill(bk);
            }
            gemm(
                MatRef::new(self.filters.data(), f, ck),
                MatRef::new(&cols, ck, out_len),
                T::one(),
                out,
            );
            if keep_cols {
                all_cols.extend_from_slice(&cols);
            }
        }
        Ok((
            pre,
            all_cols,
            ConvDims {
                batch,
                in_len: len,
                out_len,
                unbatched,
            },
        ))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (pre, _, d) = self.pre_activation(x, false)?;
        Ok(output_tensor(
            d.batch,
            self.n_filters(),
            d.out_len,
            d.unbatched,
            self.activation.apply_slice(&pre),
        ))
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Conv1dCache<T>)> {
        let (pre, cols, d) = self.pre_activation(x, true)?;
        let out = output_tensor(
            d.batch,
            self.n_filters(),
            d.out_len,
            d.unbatched,
            self.activation.apply_slice(&pre),
        );
        let pre = Tensor::new(&[d.batch, self.n_filters(), d.out_len], pre)?;
        Ok((
            out,
            Conv1dCache {
                cols,
                pre,
                in_len: d.in_len,
                unbatched: d.unbatched,
            },
        ))
    }

    pub fn backward(&self, grad_out: &Tensor<T>, cache: &Conv1dCache<T>) -> Result<Conv1dGrads<T>> {
        self.backward_with(grad_out, cache, true)
    }

    pub fn backward_with(
        &self,
        grad_out: &Tensor<T>,
        cache: &Conv1dCache<T>,
        want_input: bool,
    ) -> Result<Conv1dGrads<T>> {
        let (batch, f, out_len) = (
            cache.pre.shape()[0],
            cache.pre.shape()[1],
            cache.pre.shape()[2],
        );
        let (c, k) = (self.in_channels(), self.kernel_len());
        let ck = c * k;
        if f != self.n_filters()
            || grad_out.len() != cache.pre.len()
            || cache.cols.len() != batch * ck * out_len
        {
            return Err(Error::State(format!(
                "conv1d cache holds {:?}, gradient has shape {:?}",
                cache.pre.shape(),
                grad_out.shape()
            )));
        }
        let g = self.activation.backprop(grad_out.data(), cache.pre.data());

        let mut gw = vec![T::zero(); f * ck];
        let mut gb = vec![T::zero(); f];
        let mut gx = if want_input {
            vec![T::zero(); batch * c * cache.in_len]
        } else {
            Vec::new()
        };
        let mut gcols = vec![T::zero(); ck * out_len];
        for b in 0..batch {
            let gb_out = &g[b * f * out_len..(b + 1) * f * out_len];
            let cols = &cache.cols[b * ck * out_len..(b + 1) * ck * out_len];
            gemm(
                MatRef::new(gb_out, f, out_len),
                MatRef::new(cols, ck, out_len).t(),
                T::one(),
                &mut gw,
            );
            for (acc, row) in gb.iter_mut().zip(gb_out.chunks_exact(out_len)) {
                *acc = row.iter().fold(*acc, |s, &v| s + v);
            }
            if want_input {
                gemm(
                    MatRef::new(self.filters.data(), f, ck).t(),
                    MatRef::new(gb_out, f, out_len),
                    T::zero(),
                    &mut gcols,
                );
                col2im(
                    &gcols,
                    c,
                    cache.in_len,
                    k,
                    self.stride,
                    self.padding,
                    out_len,
                    &mut gx[b * c * cache.in_len..(b + 1) * c * cache.in_len],
                );
            }
        }

        Ok(Conv1dGrads {
            input: if want_input {
                Some(output_tensor(batch, c, cache.in_len, cache.unbatched, gx))
            } else {
                None
            },
            filters: Tensor::new(&[f, c, k], gw)?,
            bias: Tensor::new(&[f], gb)?,
        })
    }
}

struct ConvDims {
    batch: usize,
    in_len: usize,
    out_len: usize,
    unbatched: bool,
}

pub(crate) fn conv_output_len(
    in_len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<usize> {
    let span = in_len + 2 * padding;
    if stride == 0 || kernel == 0 || span < kernel {
        return Err(Error::Config(format!(
            "conv1d output would be empty (len {in_len}, kernel {kernel}, stride {stride}, padding {padding})"
        )));
    }
    Ok((span - kernel) / stride + 1)
}

pub(crate) fn deconv_output_len(
    in_len: usize,
    kernel: usize,
    stride: usize,
    crop: usize,
) -> Result<usize> {
    if in_len == 0 || kernel == 0 || stride == 0 {
        return Err(Error::Config(
            "deconv1d needs positive length, kernel and stride".into(),
        ));
    }
    let natural = (in_len - 1) * stride + kernel;
    if crop >= natural {
        return Err(Error::Config(format!(
            "deconv1d crop {crop} removes the whole natural output of length {natural}"
        )));
    }
    Ok(natural - crop)
}

/// Transposed convolution. `filters` is `in_channels × out_channels × kernel_len`,
/// i.e. the same array a [`Conv1dLayer`] mapping `out_channels → in_channels` uses,
/// so that sharing weights makes the two layers adjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Deconv1dLayer<T> {
    pub filters: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    /// Trailing elements removed from the natural output `(in_len-1)·stride + kernel_len`.
    pub output_crop: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct Deconv1dCache<T> {
    input: Tensor<T>,
    pre: Tensor<T>,
    unbatched: bool,
}

impl<T: Scalar> Deconv1dLayer<T> {
    pub fn new(
        filters: Tensor<T>,
        bias: Tensor<T>,
        stride: usize,
        output_crop: usize,
        activation: Activation,
    ) -> Result<Self> {
        if filters.shape().len() != 3 || filters.shape()[2] == 0 {
            return Err(Error::Config(
                "deconv filters must be in_channels × out_channels × kernel_len".into(),
            ));
        }
        if stride == 0 {
            return Err(Error::Config("deconv stride must be ≥ 1".into()));
        }
        if bias.shape() != [filters.shape()[1]] {
            return Err(Error::dim(
                "deconv bias",
                &[filters.shape()[1]],
                bias.shape(),
            ));
        }
        Ok(Deconv1dLayer {
            filters,
            bias,
            stride,
            output_crop,
            activation,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.filters.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.filters.shape()[1]
    }

    pub fn kernel_len(&self) -> usize {
        self.filters.shape()[2]
    }

    pub fn output_len(&self, in_len: usize) -> Result<usize> {
        deconv_output_len(in_len, self.kernel_len(), self.stride, self.output_crop)
    }

    fn pre_activation(&self, x: &Tensor<T>) -> Result<(Vec<T>, ConvDims)> {
        let (batch, len, unbatched) = batch_dims(x, self.in_channels(), "deconv1d input channels")?;
        let out_len = self.output_len(len)?;
        let (fin, cout, k) = (self.in_channels(), self.out_channels(), self.kernel_len());
        let natural = (len - 1) * self.stride + k;
        let mut pre = vec![T::zero(); batch * cout * out_len];
        let mut cols = vec![T::zero(); cout * k * len];
        let mut full = vec![T::zero(); cout * natural];
        for b in 0..batch {
            let xb = &x.data()[b * fin * len..(b + 1) * fin * len];
            gemm(
                MatRef::new(self.filters.data(), fin, cout * k).t(),
                MatRef::new(xb, fin, len),
                T::zero(),
                &mut cols,
            );
            full.fill(T::zero());
            col2im(&cols, cout, natural, k, self.stride, 0, len, &mut full);
            let out = &mut pre[b * cout * out_len..(b + 1) * cout * out_len];
            for ((dst, src), &bc) in out
                .chunks_exact_mut(out_len)
                .zip(full.chunks_exact(natural))
                .zip(self.bias.data())
            {
                for (d, &s) in dst.iter_mut().zip(&src[..out_len]) {
                    *d = s + bc;
                }
            }
        }
        Ok((
            pre,
            ConvDims {
                batch,
                in_len: len,
                out_len,
                unbatched,
            },
        ))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (pre, d) = self.pre_activation(x)?;
        Ok(output_tensor(
            d.batch,
            self.out_channels(),
            d.out_len,
            d.unbatched,
            self.activation.apply_slice(&pre),
        ))
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Deconv1dCache<T>)> {
        let (pre, d) = self.pre_activation(x)?;
        let out = output_tensor(
            d.batch,
            self.out_channels(),
            d.out_len,
            d.unbatched,
            self.activation.apply_slice(&pre),
        );
        Ok((
            out,
            Deconv1dCache {
                input: x
                    .clone()
                    .reshape(&[d.batch, self.in_channels(), d.in_len])?,
                pre: Tensor::new(&[d.batch, self.out_channels(), d.out_len], pre)?,
                unbatched: d.unbatched,
            },
        ))
    }

    pub fn backward(
        &self,
        grad_out: &Tensor<T>,
        cache: &Deconv1dCache<T>,
    ) -> Result<Conv1dGrads<T>> {
        self.backward_with(grad_out, cache, true)
    }

    pub fn backward_with(
        &self,
        grad_out: &Tensor<T>,
        cache: &Deconv1dCache<T>,
        want_input: bool,
    ) -> Result<Conv1dGrads<T>> {
        let (fin, cout, k) = (self.in_channels(), self.out_channels(), self.kernel_len());
        let (batch, len) = (cache.input.shape()[0], cache.input.shape()[2]);
        let out_len = cache.pre.shape()[2];
        if cache.pre.shape()[1] != cout
            || cache.input.shape()[1] != fin
            || grad_out.len() != cache.pre.len()
        {
            return Err(Error::State(format!(
                "deconv1d cache holds {:?}, gradient has shape {:?}",
                cache.pre.shape(),
                grad_out.shape()
            )));
        }
        let natural = (len - 1) * self.stride + k;
        let g = self.activation.backprop(grad_out.data(), cache.pre.data());

        let mut gw = vec![T::zero(); fin * cout * k];
        let mut gb = vec![T::zero(); cout];
        let mut gx = if want_input {
            vec![T::zero(); batch * fin * len]
        } else {
            Vec::new()
        };
        let mut full = vec![T::zero(); cout * natural];
        for b in 0..batch {
            let gb_out = &g[b * cout * out_len..(b + 1) * cout * out_len];
            for ((dst, src), acc) in full
                .chunks_exact_mut(natural)
                .zip(gb_out.chunks_exact(out_len))
                .zip(gb.iter_mut())
            {
                dst[..out_len].copy_from_slice(src);
                dst[out_len..].fill(T::zero());
                *acc = src.iter().fold(*acc, |s, &v| s + v);
            }
            let gcols = im2col(&full, cout, natural, k, self.stride, 0, len);
            let xb = &cache.input.data()[b * fin * len..(b + 1) * fin * len];
            gemm(
                MatRef::new(xb, fin, len),
                MatRef::new(&gcols, cout * k, len).t(),
                T::one(),
                &mut gw,
            );
            if want_input {
                gemm(
                    MatRef::new(self.filters.data(), fin, cout * k),
                    MatRef::new(&gcols, cout * k, len),
                    T::zero(),
                    &mut gx[b * fin * len..(b + 1) * fin * len],
                );
            }
        }

        Ok(Conv1dGrads {
            input: if want_input {
                Some(output_tensor(batch, fin, len, cache.unbatched, gx))
            } else {
                None
            },
            filters: Tensor::new(&[fin, cout, k], gw)?,
            bias: Tensor::new(&[cout], gb)?,
        })
    }
}
