//! Independent oracles shared by the integration suites: naive loop kernels,
//! central finite differences and seeded random instances.
#![allow(dead_code)]

use caerom::tensor::{Activation, Conv1dLayer, Deconv1dLayer, DenseLayer, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Small integers so that every partial sum is exact in floating point.
pub fn integer_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-4i32..=4) as f64)
}

/// Direct evaluation of the strided multi-channel convolution sum,
/// `out[k][j] = b_k + Σ_u Σ_k' x[k'][j·s + u − p] · w[k][k'][u]`.
pub fn conv_oracle(x: &[f64], channels: usize, len: usize, layer: &Conv1dLayer<f64>) -> Vec<f64> {
    let (f, k, s, p) = (
        layer.n_filters(),
        layer.kernel_len(),
        layer.stride,
        layer.padding,
    );
    let out_len = (len + 2 * p - k) / s + 1;
    let w = layer.filters.data();
    let mut out = vec![0.0; f * out_len];
    for kf in 0..f {
        for j in 0..out_len {
            let mut acc = 0.0;
            for u in 0..k {
                for c in 0..channels {
                    let pos = (j * s + u) as isize - p as isize;
                    if pos >= 0 && (pos as usize) < len {
                        acc += x[c * len + pos as usize] * w[(kf * channels + c) * k + u];
                    }
                }
            }
            out[kf * out_len + j] = layer.activation.apply(acc + layer.bias.data()[kf]);
        }
    }
    out
}

/// Direct scatter form of the transposed convolution.
pub fn deconv_oracle(x: &[f64], len: usize, layer: &Deconv1dLayer<f64>) -> Vec<f64> {
    let (fin, cout, k, s) = (
        layer.in_channels(),
        layer.out_channels(),
        layer.kernel_len(),
        layer.stride,
    );
    let natural = (len - 1) * s + k;
    let out_len = natural - layer.output_crop;
    let w = layer.filters.data();
    let mut full = vec![0.0; cout * natural];
    for fi in 0..fin {
        for j in 0..len {
            let v = x[fi * len + j];
            for c in 0..cout {
                for u in 0..k {
                    full[c * natural + j * s + u] += v * w[(fi * cout + c) * k + u];
                }
            }
        }
    }
    let mut out = Vec::with_capacity(cout * out_len);
    for c in 0..cout {
        for j in 0..out_len {
            out.push(
                layer
                    .activation
                    .apply(full[c * natural + j] + layer.bias.data()[c]),
            );
        }
    }
    out
}

pub fn dense_oracle(x: &[f64], layer: &DenseLayer<f64>) -> Vec<f64> {
    let (out, inp) = (layer.outputs(), layer.inputs());
    (0..out)
        .map(|o| {
            let mut acc = layer.bias.data()[o];
            for (i, xi) in x.iter().enumerate().take(inp) {
                acc += layer.weight.data()[o * inp + i] * xi;
            }
            layer.activation.apply(acc)
        })
        .collect()
}

pub const FD_STEP: f64 = 1e-5;

/// Relative error with a small absolute floor so that vanishing entries do
/// not divide by zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Central-difference gradient of `f` with respect to every entry of `x`.
pub fn fd_gradient(x: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + FD_STEP;
            let up = f(&probe);
            probe.data_mut()[i] = orig - FD_STEP;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| rel_err(a, b))
        .fold(0.0, f64::max)
}

pub fn random_conv(rng: &mut impl Rng, act: Activation) -> (Conv1dLayer<f64>, usize, usize) {
    let c = rng.random_range(1..=4);
    let f = rng.random_range(1..=4);
    let k = rng.random_range(1..=4);
    let s = rng.random_range(1..=3);
    let p = rng.random_range(0..=2);
    let len = rng.random_range(k.max(2)..=12);
    let layer = Conv1dLayer::new(
        random_tensor(&[f, c, k], rng),
        random_tensor(&[f], rng),
        s,
        p,
        act,
    )
    .unwrap();
    (layer, c, len)
}

pub fn random_deconv(rng: &mut impl Rng, act: Activation) -> (Deconv1dLayer<f64>, usize) {
    let fin = rng.random_range(1..=4);
    let cout = rng.random_range(1..=4);
    let k = rng.random_range(1..=4);
    let s = rng.random_range(1..=3);
    let len = rng.random_range(1..=8);
    let natural = (len - 1) * s + k;
    let crop = rng.random_range(0..natural.min(3));
    let layer = Deconv1dLayer::new(
        random_tensor(&[fin, cout, k], rng),
        random_tensor(&[cout], rng),
        s,
        crop,
        act,
    )
    .unwrap();
    (layer, len)
}
