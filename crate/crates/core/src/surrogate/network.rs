use rand::Rng;

use super::arch::{LayerSpec, Shape};
use crate::error::{Error, Result};
use crate::tensor::{
    avg_pool1d, avg_pool1d_backward, avg_unpool1d, avg_unpool1d_backward, glorot_uniform,
    Conv1dCache, Conv1dLayer, Deconv1dCache, Deconv1dLayer, DenseCache, DenseLayer, GlorotInit,
    Scalar, Tensor,
};

/// Executable layer. All inputs carry a leading batch axis.
#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv(Conv1dLayer<T>),
    Deconv(Deconv1dLayer<T>),
    Dense(DenseLayer<T>),
    AvgPool(usize),
    AvgUnpool(usize),
    /// Per-sample target shape.
    Reshape(Vec<usize>),
}

enum LayerCache<T> {
    Conv(Conv1dCache<T>),
    Deconv(Deconv1dCache<T>),
    Dense(DenseCache<T>),
    Pool { in_len: usize },
    Unpool,
    Reshape { in_shape: Vec<usize> },
}

/// Forward record needed by [`Network::backward`].
pub struct Tape<T> {
    caches: Vec<LayerCache<T>>,
}

/// Input gradient (when requested) and parameter gradients.
pub type Gradients<T> = (Option<Tensor<T>>, Vec<Tensor<T>>);

/// Straight-line stack of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub layers: Vec<Layer<T>>,
}

fn shape_dims(shape: Shape) -> (usize, usize) {
    match shape {
        Shape::Map { channels, length } => (channels, length),
        Shape::Vector(n) => (n, 1),
    }
}

impl<T: Scalar> Network<T> {
    /// Instantiate `specs` for a per-sample `input` shape, weights drawn
    /// scaled-uniform from `rng` in declaration order, biases zero.
    pub fn build<R: Rng + ?Sized>(input: Shape, specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input;
        for spec in specs {
            let (c_in, _) = shape_dims(shape);
            let (layer, next) = match *spec {
                LayerSpec::Conv1d {
                    filters,
                    kernel,
                    stride,
                    padding,
                    activation,
                } => {
                    let Shape::Map { length, .. } = shape else {
                        return Err(Error::Config(
                            "conv1d needs a channels × length input".into(),
                        ));
                    };
                    let w = glorot_uniform(
                        &[filters, c_in, kernel],
                        GlorotInit {
                            fan_in: c_in * kernel,
                            fan_out: filters * kernel,
                        },
                        rng,
                    );
                    let l = Conv1dLayer::new(
                        w,
                        Tensor::zeros(&[filters]),
                        stride,
                        padding,
                        activation,
                    )?;
                    let out = l.output_len(length)?;
                    (
                        Layer::Conv(l),
                        Shape::Map {
                            channels: filters,
                            length: out,
                        },
                    )
                }
                LayerSpec::Deconv1d {
                    filters,
                    kernel,
                    stride,
                    crop,
                    activation,
                } => {
                    let Shape::Map { length, .. } = shape else {
                        return Err(Error::Config(
                            "deconv1d needs a channels × length input".into(),
                        ));
                    };
                    let crop = crop.ok_or_else(|| {
                        Error::Config("deconv crop must be resolved before build".into())
                    })?;
                    let w = glorot_uniform(
                        &[c_in, filters, kernel],
                        GlorotInit {
                            fan_in: c_in * kernel,
                            fan_out: filters * kernel,
                        },
                        rng,
                    );
                    let l =
                        Deconv1dLayer::new(w, Tensor::zeros(&[filters]), stride, crop, activation)?;
                    let out = l.output_len(length)?;
                    (
                        Layer::Deconv(l),
                        Shape::Map {
                            channels: filters,
                            length: out,
                        },
                    )
                }
                LayerSpec::Dense { units, activation } => {
                    let inputs = shape.size();
                    let w = glorot_uniform(
                        &[units, inputs],
                        GlorotInit {
                            fan_in: inputs,
                            fan_out: units,
                        },
                        rng,
                    );
                    (
                        Layer::Dense(DenseLayer::new(w, Tensor::zeros(&[units]), activation)?),
                        Shape::Vector(units),
                    )
                }
                LayerSpec::AvgPool { window } => {
                    let Shape::Map { channels, length } = shape else {
                        return Err(Error::Config(
                            "avg_pool needs a channels × length input".into(),
                        ));
                    };
                    (
                        Layer::AvgPool(window),
                        Shape::Map {
                            channels,
                            length: crate::tensor::pooled_len(length, window)?,
                        },
                    )
                }
                LayerSpec::AvgUnpool { window } => {
                    let Shape::Map { channels, length } = shape else {
                        return Err(Error::Config(
                            "avg_unpool needs a channels × length input".into(),
                        ));
                    };
                    (
                        Layer::AvgUnpool(window),
                        Shape::Map {
                            channels,
                            length: length * window,
                        },
                    )
                }
                LayerSpec::Flatten => (
                    Layer::Reshape(vec![shape.size()]),
                    Shape::Vector(shape.size()),
                ),
                LayerSpec::Reshape { channels, length } => {
                    if channels * length != shape.size() {
                        return Err(Error::Config(format!(
                            "cannot reshape {} values to {channels} × {length}",
                            shape.size()
                        )));
                    }
                    (
                        Layer::Reshape(vec![channels, length]),
                        Shape::Map { channels, length },
                    )
                }
            };
            layers.push(layer);
            shape = next;
        }
        Ok(Network { layers })
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Conv(c) => out.extend([&c.filters, &c.bias]),
                Layer::Deconv(d) => out.extend([&d.filters, &d.bias]),
                Layer::Dense(d) => out.extend([&d.weight, &d.bias]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Conv(c) => out.extend([&mut c.filters, &mut c.bias]),
                Layer::Deconv(d) => out.extend([&mut d.filters, &mut d.bias]),
                Layer::Dense(d) => out.extend([&mut d.weight, &mut d.bias]),
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn step(layer: &Layer<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        match layer {
            Layer::Conv(c) => c.forward(x),
            Layer::Deconv(d) => d.forward(x),
            Layer::Dense(d) => d.forward(x),
            Layer::AvgPool(w) => avg_pool1d(x, *w),
            Layer::AvgUnpool(w) => avg_unpool1d(x, *w),
            Layer::Reshape(shape) => reshape_batched(x.clone(), shape),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for l in &self.layers {
            h = Self::step(l, &h)?;
        }
        Ok(h)
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>)> {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (out, cache) = match l {
                Layer::Conv(c) => {
                    let (o, k) = c.forward_train(&h)?;
                    (o, LayerCache::Conv(k))
                }
                Layer::Deconv(d) => {
                    let (o, k) = d.forward_train(&h)?;
                    (o, LayerCache::Deconv(k))
                }
                Layer::Dense(d) => {
                    let (o, k) = d.forward_train(&h)?;
                    (o, LayerCache::Dense(k))
                }
                Layer::AvgPool(w) => {
                    let in_len = *h.shape().last().expect("non-empty shape");
                    (avg_pool1d(&h, *w)?, LayerCache::Pool { in_len })
                }
                Layer::AvgUnpool(w) => (avg_unpool1d(&h, *w)?, LayerCache::Unpool),
                Layer::Reshape(shape) => {
                    let in_shape = h.shape().to_vec();
                    (reshape_batched(h, shape)?, LayerCache::Reshape { in_shape })
                }
            };
            caches.push(cache);
            h = out;
        }
        Ok((h, Tape { caches }))
    }

    /// Parameter gradients in [`Network::params`] order, plus the input
    /// gradient when `want_input` is set.
    pub fn backward(
        &self,
        grad_out: &Tensor<T>,
        tape: &Tape<T>,
        want_input: bool,
    ) -> Result<Gradients<T>> {
        if tape.caches.len() != self.layers.len() {
            return Err(Error::State(
                "tape was recorded by a different network".into(),
            ));
        }
        let mut grads: Vec<Tensor<T>> = Vec::new();
        let mut g = grad_out.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(&tape.caches).enumerate().rev() {
            let need_input = want_input || i > 0;
            match (layer, cache) {
                (Layer::Conv(c), LayerCache::Conv(k)) => {
                    let r = c.backward_with(&g, k, need_input)?;
                    grads.extend([r.bias, r.filters]);
                    if let Some(gi) = r.input {
                        g = gi;
                    }
                }
                (Layer::Deconv(d), LayerCache::Deconv(k)) => {
                    let r = d.backward_with(&g, k, need_input)?;
                    grads.extend([r.bias, r.filters]);
                    if let Some(gi) = r.input {
                        g = gi;
                    }
                }
                (Layer::Dense(d), LayerCache::Dense(k)) => {
                    let r = d.backward(&g, k)?;
                    grads.extend([r.bias, r.weight]);
                    g = r.input;
                }
                (Layer::AvgPool(w), LayerCache::Pool { in_len }) => {
                    g = avg_pool1d_backward(&g, *in_len, *w)?;
                }
                (Layer::AvgUnpool(w), LayerCache::Unpool) => {
                    g = avg_unpool1d_backward(&g, *w)?;
                }
                (Layer::Reshape(_), LayerCache::Reshape { in_shape }) => {
                    g = g.reshape(in_shape)?;
                }
                _ => {
                    return Err(Error::State(format!(
                        "tape entry {i} does not match its layer"
                    )))
                }
            }
        }
        grads.reverse();
        Ok((want_input.then_some(g), grads))
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => Layer::Conv(Conv1dLayer {
                    filters: c.filters.cast(),
                    bias: c.bias.cast(),
                    stride: c.stride,
                    padding: c.padding,
                    activation: c.activation,
                }),
                Layer::Deconv(d) => Layer::Deconv(Deconv1dLayer {
                    filters: d.filters.cast(),
                    bias: d.bias.cast(),
                    stride: d.stride,
                    output_crop: d.output_crop,
                    activation: d.activation,
                }),
                Layer::Dense(d) => Layer::Dense(DenseLayer {
                    weight: d.weight.cast(),
                    bias: d.bias.cast(),
                    activation: d.activation,
                }),
                Layer::AvgPool(w) => Layer::AvgPool(*w),
                Layer::AvgUnpool(w) => Layer::AvgUnpool(*w),
                Layer::Reshape(s) => Layer::Reshape(s.clone()),
            })
            .collect();
        Network { layers }
    }

    /// Replace all parameters, in [`Network::params`] order.
    pub fn load_params(&mut self, values: Vec<Tensor<T>>) -> Result<()> {
        let mut targets = self.params_mut();
        if targets.len() != values.len() {
            return Err(Error::Format(format!(
                "network has {} parameter tensors, got {}",
                targets.len(),
                values.len()
            )));
        }
        for (t, v) in targets.iter_mut().zip(values) {
            if t.shape() != v.shape() {
                return Err(Error::dim("parameter tensor", t.shape(), v.shape()));
            }
            **t = v;
        }
        Ok(())
    }

    /// Euclidean norm of each parameter tensor, for diagnostics.
    pub fn param_norms(&self) -> Vec<f64> {
        self.params().iter().map(|p| p.norm()).collect()
    }
}

fn reshape_batched<T: Scalar>(x: Tensor<T>, per_sample: &[usize]) -> Result<Tensor<T>> {
    let batch = x.shape()[0];
    let mut shape = vec![batch];
    shape.extend_from_slice(per_sample);
    x.reshape(&shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Activation;
    use rand::SeedableRng;

    #[test]
    fn param_order_matches_gradient_order() {
        let specs = [
            LayerSpec::Dense {
                units: 3,
                activation: Activation::Tanh,
            },
            LayerSpec::Dense {
                units: 2,
                activation: Activation::Linear,
            },
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let net: Network<f64> = Network::build(Shape::Vector(4), &specs, &mut rng).unwrap();
        let x = Tensor::new(&[2, 4], vec![0.1, 0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8]).unwrap();
        let (y, tape) = net.forward_train(&x).unwrap();
        assert_eq!(y.shape(), &[2, 2]);
        let (gi, grads) = net.backward(&Tensor::zeros(&[2, 2]), &tape, true).unwrap();
        let shapes: Vec<_> = grads.iter().map(|g| g.shape().to_vec()).collect();
        let expect: Vec<_> = net.params().iter().map(|p| p.shape().to_vec()).collect();
        assert_eq!(shapes, expect);
        assert_eq!(gi.unwrap().shape(), &[2, 4]);
    }
}
