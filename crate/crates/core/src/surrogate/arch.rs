use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{conv_output_len, deconv_output_len, pooled_len, Activation};

/// One stage of an encoder, decoder or regression stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv1d {
        filters: usize,
        kernel: usize,
        stride: usize,
        #[serde(default)]
        padding: usize,
        activation: Activation,
    },
    AvgPool {
        window: usize,
    },
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
    Reshape {
        channels: usize,
        length: usize,
    },
    AvgUnpool {
        window: usize,
    },
    /// Transposed convolution; `crop = None` lets the validator pick the
    /// trailing crop that mirrors the matching encoder convolution.
    Deconv1d {
        filters: usize,
        kernel: usize,
        stride: usize,
        #[serde(default)]
        crop: Option<usize>,
        activation: Activation,
    },
}

/// Per-sample activation shape: channels × length, or a flat vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Map { channels: usize, length: usize },
    Vector(usize),
}

impl Shape {
    pub fn size(self) -> usize {
        match self {
            Shape::Map { channels, length } => channels * length,
            Shape::Vector(n) => n,
        }
    }

    pub fn dims(self) -> Vec<usize> {
        match self {
            Shape::Map { channels, length } => vec![channels, length],
            Shape::Vector(n) => vec![n],
        }
    }
}

fn map_shape(shape: Shape, layer: usize, what: &str) -> Result<(usize, usize)> {
    match shape {
        Shape::Map { channels, length } => Ok((channels, length)),
        Shape::Vector(_) => Err(Error::Config(format!(
            "layer {layer} ({what}) needs a channels × length input"
        ))),
    }
}

/// Propagate `input` through `layers`, returning every intermediate shape
/// (first entry is the input) and the crop of every deconvolution.
/// `crop_target(k)` is the length the `k`-th deconvolution must produce when
/// its crop is automatic.
fn trace(
    input: Shape,
    layers: &[LayerSpec],
    crop_target: impl Fn(usize) -> Option<usize>,
) -> Result<(Vec<Shape>, Vec<usize>)> {
    let mut shapes = vec![input];
    let mut crops = Vec::new();
    let mut shape = input;
    let mut deconv_index = 0;
    for (i, layer) in layers.iter().enumerate() {
        shape = match *layer {
            LayerSpec::Conv1d {
                filters,
                kernel,
                stride,
                padding,
                ..
            } => {
                let (_, len) = map_shape(shape, i, "conv1d")?;
                if filters == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::Config(format!(
                        "layer {i}: conv1d sizes must be ≥ 1"
                    )));
                }
                Shape::Map {
                    channels: filters,
                    length: conv_output_len(len, kernel, stride, padding)?,
                }
            }
            LayerSpec::AvgPool { window } | LayerSpec::AvgUnpool { window } if window < 2 => {
                return Err(Error::Config(format!("layer {i}: pool window must be ≥ 2")));
            }
            LayerSpec::AvgPool { window } => {
                let (c, len) = map_shape(shape, i, "avg_pool")?;
                let pooled = pooled_len(len, window)?;
                if pooled * window != len {
                    return Err(Error::Config(format!(
                        "layer {i}: pool window {window} does not divide length {len}"
                    )));
                }
                Shape::Map {
                    channels: c,
                    length: pooled,
                }
            }
            LayerSpec::AvgUnpool { window } => {
                let (c, len) = map_shape(shape, i, "avg_unpool")?;
                Shape::Map {
                    channels: c,
                    length: len * window,
                }
            }
            LayerSpec::Flatten => Shape::Vector(shape.size()),
            LayerSpec::Dense { units, .. } => {
                if !matches!(shape, Shape::Vector(_)) {
                    return Err(Error::Config(format!(
                        "layer {i}: dense needs a flat input"
                    )));
                }
                if units == 0 {
                    return Err(Error::Config(format!("layer {i}: dense units must be ≥ 1")));
                }
                Shape::Vector(units)
            }
            LayerSpec::Reshape { channels, length } => {
                if channels * length != shape.size() {
                    return Err(Error::Config(format!(
                        "layer {i}: cannot reshape {} values to {channels} × {length}",
                        shape.size()
                    )));
                }
                Shape::Map { channels, length }
            }
            LayerSpec::Deconv1d {
                filters,
                kernel,
                stride,
                crop,
                ..
            } => {
                let (_, len) = map_shape(shape, i, "deconv1d")?;
                if filters == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::Config(format!(
                        "layer {i}: deconv1d sizes must be ≥ 1"
                    )));
                }
                let natural = (len - 1) * stride + kernel;
                let target = crop_target(deconv_index);
                if let Some(t) = target.filter(|&t| natural < t) {
                    return Err(Error::Config(format!(
                        "layer {i}: deconv natural length {natural} is shorter than the target {t}"
                    )));
                }
                let crop = crop.or(target.map(|t| natural - t)).unwrap_or(0);
                deconv_index += 1;
                crops.push(crop);
                Shape::Map {
                    channels: filters,
                    length: deconv_output_len(len, kernel, stride, crop)?,
                }
            }
        };
        shapes.push(shape);
    }
    Ok((shapes, crops))
}

/// Encoder/decoder stacks over `channels × length` solution matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaeArchitecture {
    /// Rows of the solution matrix (input channels).
    pub channels: usize,
    /// Time instants (input length).
    pub length: usize,
    pub latent_dim: usize,
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
}

/// Result of shape validation, with deconvolution crops resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedCae {
    pub encoder_shapes: Vec<Shape>,
    pub decoder_shapes: Vec<Shape>,
    pub decoder: Vec<LayerSpec>,
}

impl CaeArchitecture {
    /// Mirrored default: two strided convolutions, optional average pooling,
    /// a linear latent layer, and the transposed path back.
    pub fn mirrored(
        channels: usize,
        length: usize,
        filters: [usize; 2],
        kernel: usize,
        pool: Option<usize>,
        latent_dim: usize,
    ) -> Result<Self> {
        let conv = |f| LayerSpec::Conv1d {
            filters: f,
            kernel,
            stride: 2,
            padding: kernel / 2,
            activation: Activation::Relu,
        };
        let mut encoder = vec![conv(filters[0]), conv(filters[1])];
        let len1 = conv_output_len(length, kernel, 2, kernel / 2)?;
        let len2 = conv_output_len(len1, kernel, 2, kernel / 2)?;
        let mut bottleneck = len2;
        if let Some(w) = pool {
            encoder.push(LayerSpec::AvgPool { window: w });
            bottleneck = pooled_len(len2, w)?;
        }
        encoder.push(LayerSpec::Flatten);
        encoder.push(LayerSpec::Dense {
            units: latent_dim,
            activation: Activation::Linear,
        });
        let mut decoder = vec![
            LayerSpec::Dense {
                units: filters[1] * bottleneck,
                activation: Activation::Relu,
            },
            LayerSpec::Reshape {
                channels: filters[1],
                length: bottleneck,
            },
        ];
        if let Some(w) = pool {
            decoder.push(LayerSpec::AvgUnpool { window: w });
        }
        let deconv = |f, a| LayerSpec::Deconv1d {
            filters: f,
            kernel,
            stride: 2,
            crop: None,
            activation: a,
        };
        decoder.push(deconv(filters[0], Activation::Relu));
        decoder.push(deconv(channels, Activation::Linear));
        let arch = CaeArchitecture {
            channels,
            length,
            latent_dim,
            encoder,
            decoder,
        };
        arch.resolve()?;
        Ok(arch)
    }

    /// Burgers default: 200 → 64 → 32 filters, kernel 5, stride 2, no
    /// pooling, latent 8.
    pub fn burgers_default() -> Self {
        Self::mirrored(200, 100, [64, 32], 5, None, 8).expect("valid default")
    }

    /// Same stacks with the latent layer resized to `latent_dim`.
    pub fn with_latent_dim(&self, latent_dim: usize) -> Result<Self> {
        let mut arch = self.clone();
        arch.latent_dim = latent_dim;
        match arch.encoder.last_mut() {
            Some(LayerSpec::Dense { units, .. }) => *units = latent_dim,
            _ => {
                return Err(Error::Config(
                    "encoder does not end in a dense latent layer".into(),
                ))
            }
        }
        arch.resolve()?;
        Ok(arch)
    }

    pub fn input_shape(&self) -> Shape {
        Shape::Map {
            channels: self.channels,
            length: self.length,
        }
    }

    /// Prove that the encoder maps `(channels, length)` to the latent size and
    /// the decoder maps it back exactly; fills in automatic crops.
    pub fn resolve(&self) -> Result<ResolvedCae> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent dimension must be ≥ 1".into()));
        }
        if self.latent_dim >= self.channels * self.length {
            return Err(Error::Config(
                "latent dimension must be smaller than the input size".into(),
            ));
        }
        let (encoder_shapes, _) = trace(self.input_shape(), &self.encoder, |_| None)?;
        let latent = *encoder_shapes.last().expect("input shape");
        if latent != Shape::Vector(self.latent_dim) {
            return Err(Error::Config(format!(
                "encoder ends in {latent:?}, expected a {}-vector",
                self.latent_dim
            )));
        }
        // Conv input lengths in reverse order are the deconv targets.
        let mut targets: Vec<usize> = self
            .encoder
            .iter()
            .zip(&encoder_shapes)
            .filter(|(l, _)| matches!(l, LayerSpec::Conv1d { .. }))
            .map(|(_, s)| match s {
                Shape::Map { length, .. } => *length,
                Shape::Vector(n) => *n,
            })
            .collect();
        targets.reverse();
        let n_deconv = self
            .decoder
            .iter()
            .filter(|l| matches!(l, LayerSpec::Deconv1d { .. }))
            .count();
        // With a different number of deconvolutions, only the last is pinned.
        let target = |k: usize| {
            if n_deconv == targets.len() {
                targets.get(k).copied()
            } else if k + 1 == n_deconv {
                Some(self.length)
            } else {
                None
            }
        };
        let (decoder_shapes, crops) = trace(Shape::Vector(self.latent_dim), &self.decoder, target)?;
        let out = *decoder_shapes.last().expect("latent shape");
        if out != self.input_shape() {
            return Err(Error::Config(format!(
                "decoder ends in {out:?}, expected {:?}",
                self.input_shape()
            )));
        }
        let mut crops = crops.into_iter();
        let decoder = self
            .decoder
            .iter()
            .map(|l| match l {
                LayerSpec::Deconv1d {
                    filters,
                    kernel,
                    stride,
                    activation,
                    ..
                } => LayerSpec::Deconv1d {
                    filters: *filters,
                    kernel: *kernel,
                    stride: *stride,
                    crop: crops.next(),
                    activation: *activation,
                },
                other => other.clone(),
            })
            .collect();
        Ok(ResolvedCae {
            encoder_shapes,
            decoder_shapes,
            decoder,
        })
    }
}

/// Parameter-to-latent regression network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FfnnArchitecture {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    #[serde(default = "relu")]
    pub hidden_activation: Activation,
    pub outputs: usize,
}

fn relu() -> Activation {
    Activation::Relu
}

impl FfnnArchitecture {
    pub fn new(inputs: usize, hidden: Vec<usize>, outputs: usize) -> Self {
        FfnnArchitecture {
            inputs,
            hidden,
            hidden_activation: Activation::Relu,
            outputs,
        }
    }

    /// 1 → 4 × 32 ReLU → 8 linear.
    pub fn burgers_default() -> Self {
        Self::new(1, vec![32; 4], 8)
    }

    pub fn with_outputs(mut self, outputs: usize) -> Self {
        self.outputs = outputs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.outputs == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("FFNN widths must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut layers: Vec<LayerSpec> = self
            .hidden
            .iter()
            .map(|&units| LayerSpec::Dense {
                units,
                activation: self.hidden_activation,
            })
            .collect();
        layers.push(LayerSpec::Dense {
            units: self.outputs,
            activation: Activation::Linear,
        });
        layers
    }

    /// Widths including input and output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.inputs];
        w.extend(&self.hidden);
        w.push(self.outputs);
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burgers_default_shapes() {
        let arch = CaeArchitecture::burgers_default();
        let r = arch.resolve().unwrap();
        assert_eq!(
            r.encoder_shapes,
            vec![
                Shape::Map {
                    channels: 200,
                    length: 100
                },
                Shape::Map {
                    channels: 64,
                    length: 50
                },
                Shape::Map {
                    channels: 32,
                    length: 25
                },
                Shape::Vector(800),
                Shape::Vector(8),
            ]
        );
        assert_eq!(
            *r.decoder_shapes.last().unwrap(),
            Shape::Map {
                channels: 200,
                length: 100
            }
        );
        let crops: Vec<_> = r
            .decoder
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Deconv1d { crop, .. } => *crop,
                _ => None,
            })
            .collect();
        assert_eq!(crops, vec![3, 3]);
    }

    #[test]
    fn pooled_variant_shrinks_bottleneck() {
        let arch = CaeArchitecture::mirrored(200, 100, [64, 32], 5, Some(5), 8).unwrap();
        let r = arch.resolve().unwrap();
        assert_eq!(
            r.encoder_shapes[3],
            Shape::Map {
                channels: 32,
                length: 5
            }
        );
        assert_eq!(r.encoder_shapes[4], Shape::Vector(160));
        assert_eq!(*r.decoder_shapes.last().unwrap(), arch.input_shape());
    }

    #[test]
    fn latent_resize_keeps_stacks_valid() {
        let arch = CaeArchitecture::burgers_default()
            .with_latent_dim(2)
            .unwrap();
        assert_eq!(
            *arch.resolve().unwrap().encoder_shapes.last().unwrap(),
            Shape::Vector(2)
        );
    }

    #[test]
    fn mismatched_latent_rejected() {
        let mut arch = CaeArchitecture::burgers_default();
        arch.latent_dim = 9;
        assert!(arch.resolve().is_err());
    }

    #[test]
    fn pool_remainder_rejected() {
        assert!(CaeArchitecture::mirrored(10, 100, [4, 4], 5, Some(4), 3).is_err());
    }

    #[test]
    fn ffnn_widths() {
        assert_eq!(
            FfnnArchitecture::burgers_default().widths(),
            vec![1, 32, 32, 32, 32, 8]
        );
    }
}
