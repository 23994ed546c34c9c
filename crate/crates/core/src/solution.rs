use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full time history of a discretized field: one row per degree of freedom,
/// one column per time instant, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionMatrix {
    dofs: usize,
    steps: usize,
    values: Vec<f64>,
    pub dof_labels: Vec<String>,
    pub time_axis: Vec<f64>,
}

impl SolutionMatrix {
    pub fn new(dofs: usize, steps: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != dofs * steps {
            return Err(Error::dim(
                "solution matrix",
                &[dofs, steps],
                &[values.len()],
            ));
        }
        Ok(SolutionMatrix {
            dofs,
            steps,
            values,
            dof_labels: Vec::new(),
            time_axis: Vec::new(),
        })
    }

    pub fn zeros(dofs: usize, steps: usize) -> Self {
        SolutionMatrix {
            dofs,
            steps,
            values: vec![0.0; dofs * steps],
            dof_labels: Vec::new(),
            time_axis: Vec::new(),
        }
    }

    /// Build from time-ordered column vectors of length `dofs`.
    pub fn from_columns(dofs: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let steps = columns.len();
        let mut m = SolutionMatrix::zeros(dofs, steps);
        for (j, col) in columns.iter().enumerate() {
            if col.len() != dofs {
                return Err(Error::dim("solution column", &[dofs], &[col.len()]));
            }
            for (i, &v) in col.iter().enumerate() {
                m.values[i * steps + j] = v;
            }
        }
        Ok(m)
    }

    pub fn with_time_axis(mut self, time_axis: Vec<f64>) -> Self {
        self.time_axis = time_axis;
        self
    }

    pub fn with_dof_labels(mut self, labels: Vec<String>) -> Self {
        self.dof_labels = labels;
        self
    }

    pub fn dofs(&self) -> usize {
        self.dofs
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.dofs, self.steps)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, dof: usize, step: usize) -> f64 {
        self.values[dof * self.steps + step]
    }

    #[inline]
    pub fn set(&mut self, dof: usize, step: usize, v: f64) {
        self.values[dof * self.steps + step] = v;
    }

    pub fn row(&self, dof: usize) -> &[f64] {
        &self.values[dof * self.steps..(dof + 1) * self.steps]
    }

    pub fn column(&self, step: usize) -> Vec<f64> {
        (0..self.dofs).map(|i| self.get(i, step)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> SolutionMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Keep every `row_step`-th row and `col_step`-th column.
    pub fn restrict(&self, row_step: usize, col_step: usize) -> SolutionMatrix {
        let rows: Vec<usize> = (0..self.dofs).step_by(row_step).collect();
        let cols: Vec<usize> = (0..self.steps).step_by(col_step).collect();
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        for &i in &rows {
            for &j in &cols {
                values.push(self.get(i, j));
            }
        }
        SolutionMatrix {
            dofs: rows.len(),
            steps: cols.len(),
            values,
            dof_labels: Vec::new(),
            time_axis: cols
                .iter()
                .filter_map(|&j| self.time_axis.get(j).copied())
                .collect(),
        }
    }

    pub fn ensure_same_shape(&self, other: &SolutionMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                "solution matrix",
                &[self.dofs, self.steps],
                &[other.dofs, other.steps],
            ));
        }
        Ok(())
    }
}
