use super::arch::{FfnnArchitecture, Shape};
use super::network::Network;
use super::norm::InputScaling;
use super::train::{fit, Objective, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::stats::{substream, ParameterVector};
use crate::tensor::{mse_loss, Tensor};

/// Regression from scaled parameters to raw latent codes.
#[derive(Clone, Debug, PartialEq)]
pub struct Ffnn {
    pub architecture: FfnnArchitecture,
    pub scaling: InputScaling,
    pub network: Network<f32>,
}

impl Ffnn {
    /// Fresh weights from substream 0 of `seed`.
    pub fn new(architecture: &FfnnArchitecture, scaling: InputScaling, seed: u64) -> Result<Self> {
        architecture.validate()?;
        if scaling.dim() != architecture.inputs {
            return Err(Error::dim(
                "input scaling",
                &[architecture.inputs],
                &[scaling.dim()],
            ));
        }
        let mut rng = substream(seed, 0);
        let network = Network::build(
            Shape::Vector(architecture.inputs),
            &architecture.layers(),
            &mut rng,
        )?;
        Ok(Ffnn {
            architecture: architecture.clone(),
            scaling,
            network,
        })
    }

    fn inputs(&self, thetas: &[ParameterVector]) -> Result<Tensor<f32>> {
        let mut data = Vec::with_capacity(thetas.len() * self.architecture.inputs);
        for theta in thetas {
            data.extend(self.scaling.apply(theta)?.into_iter().map(|v| v as f32));
        }
        Tensor::new(&[thetas.len(), self.architecture.inputs], data)
    }

    pub fn predict_latent(&self, theta: &ParameterVector) -> Result<Vec<f32>> {
        Ok(self
            .predict_latent_batch(std::slice::from_ref(theta))?
            .remove(0))
    }

    pub fn predict_latent_batch(&self, thetas: &[ParameterVector]) -> Result<Vec<Vec<f32>>> {
        let z = self.network.forward(&self.inputs(thetas)?)?;
        z.ensure_finite("predicted latent code")?;
        Ok(z.data()
            .chunks(self.architecture.outputs)
            .map(<[f32]>::to_vec)
            .collect())
    }

    /// Whether `theta` lies inside the training box.
    pub fn in_range(&self, theta: &ParameterVector) -> bool {
        self.scaling.contains(theta)
    }
}

struct FfnnObjective<'a> {
    ffnn: &'a mut Ffnn,
    inputs: &'a [f32],
    targets: &'a [f32],
}

impl Objective for FfnnObjective<'_> {
    fn params_mut(&mut self) -> Vec<&mut Tensor<f32>> {
        self.ffnn.network.params_mut()
    }

    fn params(&self) -> Vec<&Tensor<f32>> {
        self.ffnn.network.params()
    }

    fn batch(&self, indices: &[usize]) -> Result<(f64, Vec<Tensor<f32>>)> {
        let (n, l) = (
            self.ffnn.architecture.inputs,
            self.ffnn.architecture.outputs,
        );
        let gather = |src: &[f32], w: usize| -> Vec<f32> {
            indices
                .iter()
                .flat_map(|&i| src[i * w..(i + 1) * w].iter().copied())
                .collect()
        };
        let x = Tensor::new(&[indices.len(), n], gather(self.inputs, n))?;
        let target = Tensor::new(&[indices.len(), l], gather(self.targets, l))?;
        let (y, tape) = self.ffnn.network.forward_train(&x)?;
        let (loss, g) = mse_loss(&y, &target)?;
        let (_, grads) = self.ffnn.network.backward(&g, &tape, false)?;
        Ok((loss as f64, grads))
    }
}

/// Fit the input scaling to `params` and train the regression onto `latents`.
pub fn train_ffnn(
    params: &[ParameterVector],
    latents: &[Vec<f32>],
    architecture: &FfnnArchitecture,
    cfg: &TrainConfig,
) -> Result<(Ffnn, TrainReport)> {
    if params.len() != latents.len() {
        return Err(Error::dim(
            "training pairs",
            &[params.len()],
            &[latents.len()],
        ));
    }
    cfg.validate(params.len())?;
    let scaling = InputScaling::fit(params)?;
    let mut ffnn = Ffnn::new(architecture, scaling, cfg.seed)?;
    let inputs = ffnn.inputs(params)?.into_data();
    let mut targets = Vec::with_capacity(latents.len() * architecture.outputs);
    for z in latents {
        if z.len() != architecture.outputs {
            return Err(Error::dim(
                "latent target",
                &[architecture.outputs],
                &[z.len()],
            ));
        }
        targets.extend_from_slice(z);
    }
    let report = fit(
        &mut FfnnObjective {
            ffnn: &mut ffnn,
            inputs: &inputs,
            targets: &targets,
        },
        params.len(),
        cfg,
    )?;
    Ok((ffnn, report))
}
