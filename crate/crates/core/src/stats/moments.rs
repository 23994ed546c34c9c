use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;

/// One-pass entrywise mean and sum of squared deviations (Welford), mergeable
/// with Chan's pairwise update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    shape: (usize, usize),
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dofs: usize, steps: usize) -> Self {
        MomentAccumulator {
            shape: (dofs, steps),
            count: 0,
            mean: vec![0.0; dofs * steps],
            m2: vec![0.0; dofs * steps],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn push(&mut self, sample: &SolutionMatrix) -> Result<()> {
        if sample.shape() != self.shape {
            return Err(Error::dim(
                "monte-carlo sample",
                &[self.shape.0, self.shape.1],
                &[sample.dofs(), sample.steps()],
            ));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, q), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(sample.values()) {
            let delta = x - *m;
            *m += delta / n;
            *q += delta * (x - *m);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        if other.shape != self.shape {
            return Err(Error::dim(
                "accumulator merge",
                &[self.shape.0, self.shape.1],
                &[other.shape.0, other.shape.1],
            ));
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn mean(&self) -> SolutionMatrix {
        SolutionMatrix::new(self.shape.0, self.shape.1, self.mean.clone())
            .expect("accumulator shape")
    }

    /// Unbiased sample variance; needs at least two samples.
    pub fn variance(&self) -> Result<SolutionMatrix> {
        if self.count < 2 {
            return Err(Error::UndefinedMetric(format!(
                "variance needs ≥ 2 samples, have {}",
                self.count
            )));
        }
        let scale = 1.0 / (self.count - 1) as f64;
        let var = self.m2.iter().map(|q| (q * scale).max(0.0)).collect();
        SolutionMatrix::new(self.shape.0, self.shape.1, var)
    }
}

/// Entrywise mean and unbiased variance of a stream of equally shaped matrices.
pub fn mc_statistics<I>(solutions: I) -> Result<(SolutionMatrix, SolutionMatrix)>
where
    I: IntoIterator<Item = SolutionMatrix>,
{
    let mut acc: Option<MomentAccumulator> = None;
    for s in solutions {
        let a = acc.get_or_insert_with(|| MomentAccumulator::new(s.dofs(), s.steps()));
        a.push(&s)?;
    }
    let acc = acc.ok_or_else(|| Error::UndefinedMetric("empty ensemble".into()))?;
    Ok((acc.mean(), acc.variance()?))
}
