//! Parameter sampling, streaming Monte-Carlo moments, error metrics and
//! kernel density estimates.

mod kde;
mod metrics;
mod moments;
mod rng;
mod sampling;

pub use kde::{default_pdf_grid, pdf_estimate, silverman_bandwidth, PdfEstimate};
pub use metrics::{average_normalized_error, normalized_error};
pub use moments::{mc_statistics, MomentAccumulator};
pub use rng::{substream, SeedRng};
pub use sampling::{
    lhs_sample, lognormal_params, sample_lognormal, Distribution, ParameterSpace, ParameterVector,
};
