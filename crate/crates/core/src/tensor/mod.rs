//! Dense tensors and the hand-derived layer kernels the autoencoder and the
//! regression network are built from.
//!
//! Every layer exposes a pure `forward`, a `forward_train` that records what
//! the backward pass needs, and a `backward` that consumes the recorded cache.
//! Batched inputs carry the sample index on axis 0: `[batch, features]` for
//! dense layers and `[batch, channels, length]` for the 1-D convolution family.

mod adam;
mod conv;
mod dense;
mod init;
mod loss;
mod pool;

use std::fmt::Debug;

use num_traits::Float;

pub use adam::{adam_step, AdamConfig, AdamState};
pub(crate) use conv::{conv_output_len, deconv_output_len};
pub use conv::{Conv1dCache, Conv1dGrads, Conv1dLayer, Deconv1dCache, Deconv1dLayer};
pub use dense::{DenseCache, DenseGrads, DenseLayer};
pub use init::{glorot_uniform, GlorotInit};
pub use loss::mse_loss;
pub use pool::{
    avg_pool1d, avg_pool1d_backward, avg_unpool1d, avg_unpool1d_backward, max_pool1d,
    max_pool1d_backward, max_unpool1d, max_unpool1d_backward, pooled_len, MaxPoolCache, PoolMode,
    PoolSpec,
};

use crate::error::{Error, Result};

/// Floating-point element type usable by every kernel in this module.
pub trait Scalar: Float + Debug + Default + Send + Sync + 'static {
    /// `c <- alpha * a * b + beta * c` with arbitrary row/column strides.
    ///
    /// # Safety
    /// The strides and extents must describe valid, non-aliasing views into
    /// the given slices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn from_f64(v: f64) -> f32 {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn from_f64(v: f64) -> f64 {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// Row-major matrix operand for [`gemm`]: a slice plus its logical extent.
/// `transposed` reinterprets the storage as its transpose without copying.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
}

impl<'a, T> MatRef<'a, T> {
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        MatRef {
            data,
            rows,
            cols,
            transposed: false,
        }
    }

    pub fn t(self) -> Self {
        MatRef {
            transposed: !self.transposed,
            ..self
        }
    }

    fn logical(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `out (m×n, row-major) <- a·b + beta·out`.
pub(crate) fn gemm<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>, beta: T, out: &mut [T]) {
    let (m, k) = a.logical();
    let (k2, n) = b.logical();
    assert_eq!(k, k2, "gemm inner extents");
    assert_eq!(out.len(), m * n, "gemm output extent");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in out.iter_mut() {
            *v = *v * beta;
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: extents were checked above and the output does not alias the
    // shared input borrows.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Pointwise nonlinearity applied after the affine part of a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative evaluated at the pre-activation value.
    #[inline]
    pub fn derivative<T: Scalar>(self, pre: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                T::one() - t * t
            }
            Activation::Linear => T::one(),
        }
    }

    pub(crate) fn apply_slice<T: Scalar>(self, pre: &[T]) -> Vec<T> {
        match self {
            Activation::Linear => pre.to_vec(),
            _ => pre.iter().map(|&v| self.apply(v)).collect(),
        }
    }

    /// `grad * σ'(pre)` elementwise.
    pub(crate) fn backprop<T: Scalar>(self, grad: &[T], pre: &[T]) -> Vec<T> {
        match self {
            Activation::Linear => grad.to_vec(),
            _ => grad
                .iter()
                .zip(pre)
                .map(|(&g, &p)| g * self.derivative(p))
                .collect(),
        }
    }
}

/// Contiguous row-major array with 1 to 3 axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::Config(format!(
                "tensors have 1 to 3 axes, got shape {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim("tensor buffer", &[expected], &[data.len()]));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn from_vec(data: Vec<T>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors if any entry is NaN or infinite.
    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Euclidean norm of the flattened buffer, accumulated in f64.
    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| {
                let x = v.as_f64();
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Sum of elementwise products, accumulated in f64.
    pub fn dot(&self, other: &Tensor<T>) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::dim("dot", &self.shape, &other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.as_f64() * b.as_f64())
            .sum())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    /// Treat a 1-axis tensor as a batch of one; pass higher ranks through.
    pub(crate) fn batched(&self, rank: usize) -> Vec<usize> {
        if self.shape.len() + 1 == rank {
            let mut s = vec![1];
            s.extend_from_slice(&self.shape);
            s
        } else {
            self.shape.clone()
        }
    }

    /// Slice out sample `i` along axis 0 as an owned tensor of one lower rank.
    pub fn sample(&self, i: usize) -> Result<Tensor<T>> {
        if self.shape.len() < 2 || i >= self.shape[0] {
            return Err(Error::State(format!(
                "sample {i} out of range for shape {:?}",
                self.shape
            )));
        }
        let stride: usize = self.shape[1..].iter().product();
        Tensor::new(
            &self.shape[1..],
            self.data[i * stride..(i + 1) * stride].to_vec(),
        )
    }

    /// Stack equally shaped tensors along a new leading axis.
    pub fn stack(items: &[&Tensor<T>]) -> Result<Tensor<T>> {
        let first = items
            .first()
            .ok_or_else(|| Error::State("cannot stack zero tensors".into()))?;
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        let mut data = Vec::with_capacity(items.len() * first.len());
        for t in items {
            if t.shape != first.shape {
                return Err(Error::dim("stack", &first.shape, &t.shape));
            }
            data.extend_from_slice(&t.data);
        }
        Tensor::new(&shape, data)
    }
}
