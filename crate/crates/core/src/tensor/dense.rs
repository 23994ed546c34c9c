use super::{gemm, Activation, MatRef, Scalar, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer `σ(W x + b)` with `W` stored as `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub activation: Activation,
}

/// Input and pre-activation recorded by [`DenseLayer::forward_train`].
#[derive(Clone, Debug)]
pub struct DenseCache<T> {
    input: Tensor<T>,
    pre: Tensor<T>,
    unbatched: bool,
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(Error::Config("dense weight must be out × in".into()));
        }
        if bias.shape() != [weight.shape()[0]] {
            return Err(Error::dim("dense bias", &[weight.shape()[0]], bias.shape()));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    fn pre_activation(&self, x: &Tensor<T>) -> Result<(Tensor<T>, bool)> {
        let shape = x.batched(2);
        if shape.len() != 2 || shape[1] != self.inputs() {
            return Err(Error::dim(
                "dense input",
                &[shape.first().copied().unwrap_or(1), self.inputs()],
                x.shape(),
            ));
        }
        let batch = shape[0];
        let out = self.outputs();
        let mut pre = Vec::with_capacity(batch * out);
        for _ in 0..batch {
            pre.extend_from_slice(self.bias.data());
        }
        gemm(
            MatRef::new(x.data(), batch, self.inputs()),
            MatRef::new(self.weight.data(), out, self.inputs()).t(),
            T::one(),
            &mut pre,
        );
        let unbatched = x.shape().len() == 1;
        Ok((Tensor::new(&[batch, out], pre)?, unbatched))
    }

    fn finish(&self, pre: &Tensor<T>, unbatched: bool) -> Tensor<T> {
        let data = self.activation.apply_slice(pre.data());
        let shape: &[usize] = if unbatched {
            &pre.shape()[1..]
        } else {
            pre.shape()
        };
        Tensor::new(shape, data).expect("shape preserved by activation")
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (pre, unbatched) = self.pre_activation(x)?;
        Ok(self.finish(&pre, unbatched))
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        let (pre, unbatched) = self.pre_activation(x)?;
        let out = self.finish(&pre, unbatched);
        let input = x.clone().reshape(&x.batched(2))?;
        Ok((
            out,
            DenseCache {
                input,
                pre,
                unbatched,
            },
        ))
    }

    pub fn backward(&self, grad_out: &Tensor<T>, cache: &DenseCache<T>) -> Result<DenseGrads<T>> {
        let batch = cache.pre.shape()[0];
        let (out, inp) = (self.outputs(), self.inputs());
        if grad_out.len() != batch * out || cache.pre.shape()[1] != out {
            return Err(Error::State(format!(
                "dense cache holds {:?}, gradient has shape {:?}",
                cache.pre.shape(),
                grad_out.shape()
            )));
        }
        let g = self.activation.backprop(grad_out.data(), cache.pre.data());

        let mut gw = vec![T::zero(); out * inp];
        gemm(
            MatRef::new(&g, batch, out).t(),
            MatRef::new(cache.input.data(), batch, inp),
            T::zero(),
            &mut gw,
        );

        let mut gb = vec![T::zero(); out];
        for row in g.chunks_exact(out) {
            for (acc, &v) in gb.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }

        let mut gx = vec![T::zero(); batch * inp];
        gemm(
            MatRef::new(&g, batch, out),
            MatRef::new(self.weight.data(), out, inp),
            T::zero(),
            &mut gx,
        );
        let input_shape: Vec<usize> = if cache.unbatched {
            vec![inp]
        } else {
            vec![batch, inp]
        };

        Ok(DenseGrads {
            input: Tensor::new(&input_shape, gx)?,
            weight: Tensor::new(&[out, inp], gw)?,
            bias: Tensor::new(&[out], gb)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: &[f64], out: usize, inp: usize, act: Activation) -> DenseLayer<f64> {
        DenseLayer::new(
            Tensor::new(&[out, inp], w.to_vec()).unwrap(),
            Tensor::zeros(&[out]),
            act,
        )
        .unwrap()
    }

    #[test]
    fn identity_passes_through() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Linear);
        let y = l.forward(&Tensor::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
        assert_eq!(y.shape(), &[2]);
    }

    #[test]
    fn relu_kills_zero_preactivation() {
        let l = layer(&[1.0, 1.0, 1.0, 1.0], 2, 2, Activation::Relu);
        let y = l.forward(&Tensor::from_vec(vec![1.0, -1.0])).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Linear);
        let err = l
            .forward(&Tensor::from_vec(vec![1.0, 2.0, 3.0]))
            .unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn linear_grad_weight_row_is_input() {
        let l = layer(&[0.3, -0.2, 0.5, 0.7, 0.1, -0.4], 2, 3, Activation::Linear);
        let x = Tensor::from_vec(vec![1.5, -2.0, 0.25]);
        let (_, cache) = l.forward_train(&x).unwrap();
        let g = l
            .backward(&Tensor::from_vec(vec![1.0, 0.0]), &cache)
            .unwrap();
        assert_eq!(&g.weight.data()[..3], x.data());
        assert_eq!(&g.weight.data()[3..], &[0.0, 0.0, 0.0]);
        assert_eq!(g.input.shape(), &[3]);
    }

    #[test]
    fn bias_grad_is_masked_upstream_gradient() {
        let l = layer(&[1.0, -1.0, 2.0, 0.5], 2, 2, Activation::Tanh);
        let x = Tensor::from_vec(vec![0.2, 0.3]);
        let (_, cache) = l.forward_train(&x).unwrap();
        let up = Tensor::from_vec(vec![0.7, -1.1]);
        let g = l.backward(&up, &cache).unwrap();
        let pre: [f64; 2] = [0.2 - 0.3, 0.4 + 0.15];
        for (k, p) in pre.iter().enumerate() {
            let expect = up.data()[k] * (1.0 - p.tanh().powi(2));
            assert!((g.bias.data()[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn stale_cache_is_state_error() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Linear);
        let (_, cache) = l.forward_train(&Tensor::from_vec(vec![1.0, 2.0])).unwrap();
        let err = l
            .backward(&Tensor::from_vec(vec![1.0, 2.0, 3.0]), &cache)
            .unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }
}
