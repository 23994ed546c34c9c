use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ParameterVector;

/// Global affine map `raw·scale + offset` taking the training range to [−1, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
    pub offset: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        scale: 1.0,
        offset: 0.0,
    };

    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in values {
            if !v.is_finite() {
                return Err(Error::NonFinite("training data".into()));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            return Err(Error::Config("cannot normalize an empty dataset".into()));
        }
        if hi == lo {
            return Ok(Normalization {
                scale: 1.0,
                offset: -lo,
            });
        }
        let scale = 2.0 / (hi - lo);
        Ok(Normalization {
            scale,
            offset: -1.0 - lo * scale,
        })
    }

    pub fn apply(&self, raw: f64) -> f64 {
        raw * self.scale + self.offset
    }

    pub fn invert(&self, normalized: f64) -> f64 {
        (normalized - self.offset) / self.scale
    }
}

/// Per-dimension affine map of parameters onto [0, 1] over the training range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InputScaling {
    pub fn fit(params: &[ParameterVector]) -> Result<Self> {
        let first = params
            .first()
            .ok_or_else(|| Error::Config("cannot fit input scaling to no samples".into()))?;
        let n = first.len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in params {
            if p.len() != n {
                return Err(Error::dim("parameter vector", &[n], &[p.len()]));
            }
            for (j, &v) in p.values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite("parameter sample".into()));
                }
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        Ok(InputScaling { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn apply(&self, theta: &ParameterVector) -> Result<Vec<f64>> {
        if theta.len() != self.dim() {
            return Err(Error::dim(
                "parameter vector",
                &[self.dim()],
                &[theta.len()],
            ));
        }
        Ok(theta
            .values
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect())
    }

    pub fn contains(&self, theta: &ParameterVector) -> bool {
        theta.len() == self.dim()
            && theta
                .values
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&lo, &hi))| (lo..=hi).contains(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmax_maps_range_to_unit_interval() {
        let n = Normalization::fit(&[2.0, 4.0, 3.0]).unwrap();
        assert_eq!(n.apply(2.0), -1.0);
        assert_eq!(n.apply(4.0), 1.0);
        assert_eq!(n.invert(n.apply(3.0)), 3.0);
    }

    #[test]
    fn input_scaling_flags_outside_points() {
        let p: Vec<_> = [1.0, 3.0]
            .iter()
            .map(|&v| ParameterVector::new(vec![v]))
            .collect();
        let s = InputScaling::fit(&p).unwrap();
        assert_eq!(
            s.apply(&ParameterVector::new(vec![2.0])).unwrap(),
            vec![0.5]
        );
        assert!(!s.contains(&ParameterVector::new(vec![3.5])));
    }
}
