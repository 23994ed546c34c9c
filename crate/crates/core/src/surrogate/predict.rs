use super::cae::Cae;
use super::ffnn::Ffnn;
use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;
use crate::stats::ParameterVector;

/// Trained CAE decoder driven by the parameter-to-latent regression.
#[derive(Clone, Debug, PartialEq)]
pub struct Surrogate {
    pub cae: Cae,
    pub ffnn: Ffnn,
}

/// Predicted solution with a flag for parameters outside the training box.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub solution: SolutionMatrix,
    pub out_of_range: bool,
}

impl Surrogate {
    pub fn new(cae: Cae, ffnn: Ffnn) -> Result<Self> {
        if ffnn.architecture.outputs != cae.latent_dim() {
            return Err(Error::Compatibility(format!(
                "FFNN outputs {} values but the CAE latent dimension is {}",
                ffnn.architecture.outputs,
                cae.latent_dim()
            )));
        }
        Ok(Surrogate { cae, ffnn })
    }

    pub fn parameter_dim(&self) -> usize {
        self.ffnn.architecture.inputs
    }

    pub fn predict(&self, theta: &ParameterVector) -> Result<Prediction> {
        Ok(self.predict_batch(std::slice::from_ref(theta))?.remove(0))
    }

    pub fn predict_batch(&self, thetas: &[ParameterVector]) -> Result<Vec<Prediction>> {
        if let Some(bad) = thetas.iter().find(|t| t.len() != self.parameter_dim()) {
            return Err(Error::dim(
                "parameter vector",
                &[self.parameter_dim()],
                &[bad.len()],
            ));
        }
        let zs = self.ffnn.predict_latent_batch(thetas)?;
        let solutions = self.cae.decode_batch(&zs)?;
        Ok(solutions
            .into_iter()
            .zip(thetas)
            .map(|(solution, theta)| Prediction {
                solution,
                out_of_range: !self.ffnn.in_range(theta),
            })
            .collect())
    }
}
