use super::arch::{CaeArchitecture, Shape};
use super::network::Network;
use super::norm::Normalization;
use super::train::{fit, Objective, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;
use crate::stats::substream;
use crate::tensor::{mse_loss, Tensor};

/// Samples pushed through the networks at once outside training.
const INFERENCE_CHUNK: usize = 64;

/// Convolutional autoencoder over normalized solution matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Cae {
    pub architecture: CaeArchitecture,
    pub normalization: Normalization,
    pub encoder: Network<f32>,
    pub decoder: Network<f32>,
}

impl Cae {
    /// Fresh weights from substream 0 of `seed`.
    pub fn new(
        architecture: &CaeArchitecture,
        normalization: Normalization,
        seed: u64,
    ) -> Result<Self> {
        let resolved = architecture.resolve()?;
        let mut rng = substream(seed, 0);
        let encoder = Network::build(architecture.input_shape(), &architecture.encoder, &mut rng)?;
        let decoder = Network::build(
            Shape::Vector(architecture.latent_dim),
            &resolved.decoder,
            &mut rng,
        )?;
        Ok(Cae {
            architecture: architecture.clone(),
            normalization,
            encoder,
            decoder,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.architecture.latent_dim
    }

    /// `(dofs, steps)` of the matrices this model reconstructs.
    pub fn solution_shape(&self) -> (usize, usize) {
        (self.architecture.channels, self.architecture.length)
    }

    fn check_shape(&self, u: &SolutionMatrix) -> Result<()> {
        let (d, t) = self.solution_shape();
        if u.shape() != (d, t) {
            return Err(Error::dim(
                "solution matrix",
                &[d, t],
                &[u.dofs(), u.steps()],
            ));
        }
        Ok(())
    }

    fn normalized_batch(&self, us: &[&SolutionMatrix]) -> Result<Tensor<f32>> {
        let (d, t) = self.solution_shape();
        let mut data = Vec::with_capacity(us.len() * d * t);
        for u in us {
            self.check_shape(u)?;
            data.extend(
                u.values()
                    .iter()
                    .map(|&v| self.normalization.apply(v) as f32),
            );
        }
        Tensor::new(&[us.len(), d, t], data)
    }

    pub fn encode(&self, u: &SolutionMatrix) -> Result<Vec<f32>> {
        Ok(self.encode_batch(std::slice::from_ref(u))?.remove(0))
    }

    pub fn encode_batch(&self, us: &[SolutionMatrix]) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(us.len());
        for chunk in us.chunks(INFERENCE_CHUNK) {
            let refs: Vec<&SolutionMatrix> = chunk.iter().collect();
            let z = self.encoder.forward(&self.normalized_batch(&refs)?)?;
            z.ensure_finite("latent code")?;
            out.extend(z.data().chunks(self.latent_dim()).map(<[f32]>::to_vec));
        }
        Ok(out)
    }

    /// Decoder output before denormalization, shape `[batch, dofs, steps]`.
    pub fn decode_normalized(&self, zs: &[Vec<f32>]) -> Result<Tensor<f32>> {
        let l = self.latent_dim();
        let mut data = Vec::with_capacity(zs.len() * l);
        for z in zs {
            if z.len() != l {
                return Err(Error::dim("latent vector", &[l], &[z.len()]));
            }
            data.extend_from_slice(z);
        }
        let y = self.decoder.forward(&Tensor::new(&[zs.len(), l], data)?)?;
        y.ensure_finite("decoder output")?;
        Ok(y)
    }

    pub fn decode(&self, z: &[f32]) -> Result<SolutionMatrix> {
        Ok(self.decode_batch(&[z.to_vec()])?.remove(0))
    }

    pub fn decode_batch(&self, zs: &[Vec<f32>]) -> Result<Vec<SolutionMatrix>> {
        let (d, t) = self.solution_shape();
        let mut out = Vec::with_capacity(zs.len());
        for chunk in zs.chunks(INFERENCE_CHUNK) {
            let y = self.decode_normalized(chunk)?;
            for sample in y.data().chunks(d * t) {
                let values = sample
                    .iter()
                    .map(|&v| self.normalization.invert(v as f64))
                    .collect();
                out.push(SolutionMatrix::new(d, t, values)?);
            }
        }
        Ok(out)
    }

    pub fn reconstruct(&self, u: &SolutionMatrix) -> Result<SolutionMatrix> {
        self.decode(&self.encode(u)?)
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }
}

struct CaeObjective<'a> {
    cae: &'a mut Cae,
    data: &'a [f32],
}

impl Objective for CaeObjective<'_> {
    fn params_mut(&mut self) -> Vec<&mut Tensor<f32>> {
        let mut p = self.cae.encoder.params_mut();
        p.extend(self.cae.decoder.params_mut());
        p
    }

    fn params(&self) -> Vec<&Tensor<f32>> {
        let mut p = self.cae.encoder.params();
        p.extend(self.cae.decoder.params());
        p
    }

    fn batch(&self, indices: &[usize]) -> Result<(f64, Vec<Tensor<f32>>)> {
        let (d, t) = self.cae.solution_shape();
        let size = d * t;
        let mut x = Vec::with_capacity(indices.len() * size);
        for &i in indices {
            x.extend_from_slice(&self.data[i * size..(i + 1) * size]);
        }
        let x = Tensor::new(&[indices.len(), d, t], x)?;
        let (z, enc_tape) = self.cae.encoder.forward_train(&x)?;
        let (y, dec_tape) = self.cae.decoder.forward_train(&z)?;
        let (loss, g) = mse_loss(&y, &x)?;
        let (gz, mut grads) = self.cae.decoder.backward(&g, &dec_tape, true)?;
        let gz = gz.expect("requested latent gradient");
        let (_, enc_grads) = self.cae.encoder.backward(&gz, &enc_tape, false)?;
        grads.splice(0..0, enc_grads);
        Ok((loss as f64, grads))
    }
}

/// Fit the normalization to `solutions` and train a CAE to reconstruct them.
pub fn train_cae(
    solutions: &[SolutionMatrix],
    architecture: &CaeArchitecture,
    cfg: &TrainConfig,
) -> Result<(Cae, TrainReport)> {
    cfg.validate(solutions.len())?;
    let normalization = Normalization::fit(solutions.iter().flat_map(|u| u.values()))?;
    let mut cae = Cae::new(architecture, normalization, cfg.seed)?;
    let refs: Vec<&SolutionMatrix> = solutions.iter().collect();
    let data = cae.normalized_batch(&refs)?.into_data();
    let report = fit(
        &mut CaeObjective {
            cae: &mut cae,
            data: &data,
        },
        solutions.len(),
        cfg,
    )?;
    Ok((cae, report))
}
