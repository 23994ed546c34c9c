//! Convolutional autoencoder, latent regression network and their training.

mod arch;
mod cae;
mod checkpoint;
mod ffnn;
mod network;
mod norm;
mod predict;
mod train;

pub use arch::{CaeArchitecture, FfnnArchitecture, LayerSpec, ResolvedCae, Shape};
pub use cae::{train_cae, Cae};
pub use checkpoint::{ModelCheckpoint, ModelDescriptor, TrainingMetadata, FORMAT_VERSION};
pub use ffnn::{train_ffnn, Ffnn};
pub use network::{Layer, Network, Tape};
pub use norm::{InputScaling, Normalization};
pub use predict::{Prediction, Surrogate};
pub use train::{TrainConfig, TrainReport};
