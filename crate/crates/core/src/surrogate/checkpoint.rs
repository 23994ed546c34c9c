use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{CaeArchitecture, FfnnArchitecture};
use super::cae::Cae;
use super::ffnn::Ffnn;
use super::norm::{InputScaling, Normalization};
use super::train::TrainReport;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CAEROMCK";

/// Seed and outcome of the run that produced the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: Option<f64>,
    pub loss_history: Vec<f64>,
    /// Worker threads used during training.
    pub threads: usize,
}

impl TrainingMetadata {
    pub fn from_report(seed: u64, report: &TrainReport) -> Self {
        TrainingMetadata {
            seed,
            epochs: report.loss_history.len(),
            final_loss: report.final_loss(),
            loss_history: report.loss_history.clone(),
            threads: 1,
        }
    }
}

/// Architecture and frozen input transforms of a stored model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDescriptor {
    Cae {
        architecture: CaeArchitecture,
        normalization: Normalization,
    },
    Ffnn {
        architecture: FfnnArchitecture,
        scaling: InputScaling,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model: ModelDescriptor,
    metadata: TrainingMetadata,
    tensor_shapes: Vec<Vec<usize>>,
}

/// Serialized model: JSON header followed by length-prefixed f32 tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub model: ModelDescriptor,
    pub metadata: TrainingMetadata,
    pub tensors: Vec<Tensor<f32>>,
}

impl ModelCheckpoint {
    pub fn from_cae(cae: &Cae, metadata: TrainingMetadata) -> Self {
        let mut tensors: Vec<Tensor<f32>> = cae.encoder.params().into_iter().cloned().collect();
        tensors.extend(cae.decoder.params().into_iter().cloned());
        ModelCheckpoint {
            model: ModelDescriptor::Cae {
                architecture: cae.architecture.clone(),
                normalization: cae.normalization,
            },
            metadata,
            tensors,
        }
    }

    pub fn from_ffnn(ffnn: &Ffnn, metadata: TrainingMetadata) -> Self {
        ModelCheckpoint {
            model: ModelDescriptor::Ffnn {
                architecture: ffnn.architecture.clone(),
                scaling: ffnn.scaling.clone(),
            },
            metadata,
            tensors: ffnn.network.params().into_iter().cloned().collect(),
        }
    }

    pub fn to_cae(&self) -> Result<Cae> {
        let ModelDescriptor::Cae {
            architecture,
            normalization,
        } = &self.model
        else {
            return Err(Error::Compatibility(
                "checkpoint holds an FFNN, expected a CAE".into(),
            ));
        };
        let mut cae = Cae::new(architecture, *normalization, self.metadata.seed)?;
        let n_enc = cae.encoder.params().len();
        if self.tensors.len() < n_enc {
            return Err(Error::Format(
                "checkpoint is missing encoder tensors".into(),
            ));
        }
        cae.encoder.load_params(self.tensors[..n_enc].to_vec())?;
        cae.decoder.load_params(self.tensors[n_enc..].to_vec())?;
        Ok(cae)
    }

    pub fn to_ffnn(&self) -> Result<Ffnn> {
        let ModelDescriptor::Ffnn {
            architecture,
            scaling,
        } = &self.model
        else {
            return Err(Error::Compatibility(
                "checkpoint holds a CAE, expected an FFNN".into(),
            ));
        };
        let mut ffnn = Ffnn::new(architecture, scaling.clone(), self.metadata.seed)?;
        ffnn.network.load_params(self.tensors.clone())?;
        Ok(ffnn)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            model: self.model.clone(),
            metadata: self.metadata.clone(),
            tensor_shapes: self.tensors.iter().map(|t| t.shape().to_vec()).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(
            16 + json.len() + self.tensors.iter().map(|t| 8 + 4 * t.len()).sum::<usize>(),
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.tensors {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a model checkpoint".into()));
        }
        let len = r.u64()? as usize;
        let header: Header = serde_json::from_slice(r.take(len)?)
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Compatibility(format!(
                "checkpoint format version {} (supported: {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let mut tensors = Vec::with_capacity(header.tensor_shapes.len());
        for shape in &header.tensor_shapes {
            let count = r.u64()? as usize;
            let expected: usize = shape.iter().product();
            if count != expected {
                return Err(Error::Format(format!(
                    "tensor of shape {shape:?} stored with {count} values"
                )));
            }
            let data = r
                .take(4 * count)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                .collect();
            tensors.push(Tensor::new(shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(ModelCheckpoint {
            model: header.model,
            metadata: header.metadata,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("checkpoint is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8-byte slice"),
        ))
    }
}
