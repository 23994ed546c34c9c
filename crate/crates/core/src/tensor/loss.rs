use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Batch-averaged squared L2 reconstruction loss.
///
/// Axis 0 is the batch axis (a 1-axis tensor is a batch of one). Returns the
/// loss `(1/N) Σ_i ||pred_i − target_i||²` and its gradient `(2/N)(pred − target)`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::dim("mse_loss", target.shape(), pred.shape()));
    }
    let batch = if pred.shape().len() == 1 {
        1
    } else {
        pred.shape()[0]
    };
    let inv_n = T::one() / T::from_f64(batch as f64);
    let two_inv_n = inv_n + inv_n;
    let mut sum = T::zero();
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let r = p - t;
            sum = sum + r * r;
            r * two_inv_n
        })
        .collect();
    Ok((sum * inv_n, Tensor::new(pred.shape(), grad)?))
}
