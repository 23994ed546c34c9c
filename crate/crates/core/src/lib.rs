//! Non-intrusive reduced-order surrogates for parametrized, time-dependent
//! PDEs: a 1-D convolutional autoencoder compresses full space-time solution
//! matrices, a feed-forward network maps parameters to the latent codes, and
//! the decoder turns predicted codes back into solution matrices.

pub mod burgers;
pub mod elasticity;
pub mod error;
pub mod pipeline;
pub mod solution;
pub mod stats;
pub mod surrogate;
pub mod tensor;

pub use error::{Error, Result};
pub use solution::SolutionMatrix;
