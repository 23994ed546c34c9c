use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of a density estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PdfEstimate {
    Curve {
        grid: Vec<f64>,
        density: Vec<f64>,
        bandwidth: f64,
    },
    /// All samples coincide; no curve is produced.
    PointMass { value: f64 },
}

const MIN_SAMPLES: usize = 100;

fn mean_sd(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `0.9·min(sd, IQR/1.34)·n^(−1/5)`; `None` when the spread is zero.
pub fn silverman_bandwidth(samples: &[f64]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let (_, sd) = mean_sd(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (samples.len() as f64).powf(-0.2);
    (h > 0.0 && h.is_finite()).then_some(h)
}

/// Uniform grid spanning the sample range widened by five bandwidths.
pub fn default_pdf_grid(samples: &[f64], points: usize) -> Option<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0 * h;
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    Some((0..points.max(2)).map(|i| lo + i as f64 * step).collect())
}

/// Gaussian kernel density estimate on `grid` with Silverman bandwidth.
pub fn pdf_estimate(samples: &[f64], grid: &[f64]) -> Result<PdfEstimate> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Config(format!(
            "density estimate needs ≥ {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("density samples".into()));
    }
    let Some(h) = silverman_bandwidth(samples) else {
        return Ok(PdfEstimate::PointMass { value: samples[0] });
    };
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|&g| {
            norm * samples
                .iter()
                .map(|&x| {
                    let z = (g - x) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(PdfEstimate::Curve {
        grid: grid.to_vec(),
        density,
        bandwidth: h,
    })
}
