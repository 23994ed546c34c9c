use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Distribution as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal};

use super::rng::substream;
use crate::error::{Error, Result};

/// Marginal law of one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Parametrized by the mean and standard deviation of the variable
    /// itself, not of its logarithm.
    LogNormal {
        mean: f64,
        sd: f64,
    },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { lo, hi } if !lo.is_finite() || !hi.is_finite() || lo >= hi => {
                Err(Error::Config(format!(
                    "uniform range [{lo}, {hi}] is empty"
                )))
            }
            Distribution::LogNormal { mean, sd } if !(mean > 0.0 && sd > 0.0) => {
                Err(Error::Config(format!(
                    "log-normal needs mean > 0 and sd > 0, got {mean}, {sd}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Map a probability `p ∈ (0, 1)` through the inverse CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => lo + p * (hi - lo),
            Distribution::LogNormal { mean, sd } => {
                let (mu, sigma) = lognormal_params(mean, sd);
                LogNormal::new(mu, sigma)
                    .expect("validated log-normal")
                    .inverse_cdf(p)
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Distribution::Uniform { lo, hi } => (lo..=hi).contains(&x),
            Distribution::LogNormal { .. } => x > 0.0 && x.is_finite(),
        }
    }
}

/// One point of the parameter space, in physical units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParameterVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Named, independent marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpace {
    pub names: Vec<String>,
    pub distributions: Vec<Distribution>,
}

impl ParameterSpace {
    pub fn validate(&self) -> Result<()> {
        if self.names.is_empty() || self.names.len() != self.distributions.len() {
            return Err(Error::Config(format!(
                "{} parameter names for {} distributions",
                self.names.len(),
                self.distributions.len()
            )));
        }
        self.distributions
            .iter()
            .try_for_each(Distribution::validate)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Latin hypercube design: one point per equal-probability stratum in
    /// every dimension, strata paired by seeded random permutations.
    pub fn lhs(&self, n: usize, seed: u64) -> Result<Vec<ParameterVector>> {
        self.validate()?;
        let unit = unit_lhs(n, self.dim(), seed)?;
        Ok(unit
            .into_iter()
            .map(|u| {
                ParameterVector::new(
                    u.iter()
                        .zip(&self.distributions)
                        .map(|(&p, d)| d.quantile(p))
                        .collect(),
                )
            })
            .collect())
    }

    /// Independent draws; sample `i` uses substream `i` of `seed`.
    pub fn random(&self, n: usize, seed: u64) -> Result<Vec<ParameterVector>> {
        self.validate()?;
        Ok((0..n).map(|i| self.draw(seed, i as u64)).collect())
    }

    /// Sample number `index` of the plain random design.
    pub fn draw(&self, seed: u64, index: u64) -> ParameterVector {
        let mut rng = substream(seed, index);
        ParameterVector::new(
            self.distributions
                .iter()
                .map(|d| d.quantile(open_unit(&mut rng)))
                .collect(),
        )
    }

    pub fn contains(&self, theta: &ParameterVector) -> bool {
        theta.len() == self.dim()
            && theta
                .values
                .iter()
                .zip(&self.distributions)
                .all(|(&x, d)| d.contains(x))
    }
}

/// Uniform draw in the open interval (0, 1).
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn unit_lhs(n: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || dim == 0 {
        return Err(Error::Config(
            "latin hypercube needs n ≥ 1 and dim ≥ 1".into(),
        ));
    }
    let mut points = vec![vec![0.0; dim]; n];
    for j in 0..dim {
        let mut rng = substream(seed, j as u64);
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (point, &s) in points.iter_mut().zip(&strata) {
            point[j] = (s as f64 + open_unit(&mut rng)) / n as f64;
        }
    }
    Ok(points)
}

/// Latin hypercube design over the box `ranges`.
pub fn lhs_sample(n: usize, ranges: &[(f64, f64)], seed: u64) -> Result<Vec<ParameterVector>> {
    let space = ParameterSpace {
        names: (0..ranges.len()).map(|i| format!("p{i}")).collect(),
        distributions: ranges
            .iter()
            .map(|&(lo, hi)| Distribution::Uniform { lo, hi })
            .collect(),
    };
    space.lhs(n, seed)
}

/// Location and scale `(μ_ln, σ_ln)` of the underlying normal for a log-normal
/// variable with the given mean and standard deviation.
pub fn lognormal_params(mean: f64, sd: f64) -> (f64, f64) {
    let var_ln = (1.0 + (sd / mean).powi(2)).ln();
    (mean.ln() - 0.5 * var_ln, var_ln.sqrt())
}

pub fn sample_lognormal(mean: f64, sd: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    Distribution::LogNormal { mean, sd }.validate()?;
    let (mu, sigma) = lognormal_params(mean, sd);
    let dist = rand_distr::LogNormal::new(mu, sigma)
        .map_err(|e| Error::Config(format!("log-normal: {e}")))?;
    let mut rng = substream(seed, 0);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_lies_in_box() {
        let p = lhs_sample(1, &[(2.0, 3.0), (-1.0, 0.0)], 5).unwrap();
        assert_eq!(p.len(), 1);
        assert!((2.0..=3.0).contains(&p[0].values[0]));
        assert!((-1.0..=0.0).contains(&p[0].values[1]));
    }

    #[test]
    fn lognormal_parameters_for_thirty_gpa() {
        let (mu, sigma) = lognormal_params(30e9, 7.5e9);
        assert!((sigma - 1.0625f64.ln().sqrt()).abs() < 1e-15);
        assert!((sigma - 0.24622).abs() < 1e-5);
        assert!((mu - (30e9f64.ln() - 0.5 * 1.0625f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn quantile_of_median_is_exp_mu() {
        let d = Distribution::LogNormal { mean: 2.0, sd: 0.5 };
        let (mu, _) = lognormal_params(2.0, 0.5);
        assert!((d.quantile(0.5) - mu.exp()).abs() < 1e-9);
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(lhs_sample(3, &[(1.0, 1.0)], 0).is_err());
        assert!(lhs_sample(0, &[(0.0, 1.0)], 0).is_err());
        assert!(sample_lognormal(-1.0, 1.0, 3, 0).is_err());
    }
}
