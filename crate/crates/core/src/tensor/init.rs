use rand::Rng;

use super::{Scalar, Tensor};

/// Scaled-uniform initializer, `U(±sqrt(6 / (fan_in + fan_out)))`.
#[derive(Clone, Copy, Debug)]
pub struct GlorotInit {
    pub fan_in: usize,
    pub fan_out: usize,
}

impl GlorotInit {
    pub fn limit(&self) -> f64 {
        (6.0 / (self.fan_in + self.fan_out) as f64).sqrt()
    }
}

pub fn glorot_uniform<T: Scalar, R: Rng + ?Sized>(
    shape: &[usize],
    init: GlorotInit,
    rng: &mut R,
) -> Tensor<T> {
    let a = init.limit();
    Tensor::from_fn(shape, |_| T::from_f64(rng.random_range(-a..a)))
}
