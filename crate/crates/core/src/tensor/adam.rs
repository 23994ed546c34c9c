use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

/// Moment buffers for one list of parameter tensors. Owned by a single trainer.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(
        config: AdamConfig,
        params: impl IntoIterator<Item = &'a Tensor<T>>,
    ) -> Result<Self> {
        if config.lr.is_nan() || config.lr <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                config.lr
            )));
        }
        let shapes: Vec<usize> = params.into_iter().map(|p| p.len()).collect();
        Ok(AdamState {
            config,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            t: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, i: usize) -> &[T] {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &[T] {
        &self.v[i]
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// The gradients are checked for finiteness before anything is touched, so a
/// failed step leaves parameters and moments unchanged.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::State(format!(
            "adam tracks {} tensors, got {} params and {} grads",
            state.m.len(),
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(Error::dim("adam parameter", &[state.m[i].len()], g.shape()));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!(
                "gradient of parameter tensor {i}"
            )));
        }
    }

    state.t += 1;
    let c = state.config;
    let t = state.t as i32;
    let b1 = T::from_f64(c.beta1);
    let b2 = T::from_f64(c.beta2);
    let one = T::one();
    let bc1 = T::from_f64(1.0 - c.beta1.powi(t));
    let bc2 = T::from_f64(1.0 - c.beta2.powi(t));
    let lr = T::from_f64(c.lr);
    let eps = T::from_f64(c.eps);

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (((w, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
