use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewmarkConfig {
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    /// Rayleigh coefficients `(α, β_R)` of `C = α·M + β_R·K`.
    #[serde(default)]
    pub rayleigh: [f64; 2],
}

mod defaults {
    pub fn beta() -> f64 {
        0.25
    }
    pub fn gamma() -> f64 {
        0.5
    }
    pub fn dt() -> f64 {
        0.01
    }
}

impl Default for NewmarkConfig {
    fn default() -> Self {
        NewmarkConfig {
            beta: defaults::beta(),
            gamma: defaults::gamma(),
            dt: defaults::dt(),
            rayleigh: [0.0, 0.0],
        }
    }
}

impl NewmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 0.5) {
            return Err(Error::Config(format!(
                "Newmark β = {} outside (0, 0.5]",
                self.beta
            )));
        }
        if !(0.5..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "Newmark γ = {} outside [0.5, 1]",
                self.gamma
            )));
        }
        if self.dt.is_nan() || self.dt <= 0.0 {
            return Err(Error::Config("Newmark time step must be positive".into()));
        }
        if self.rayleigh.iter().any(|&c| c < 0.0) {
            return Err(Error::Config(
                "Rayleigh coefficients must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Displacement, velocity and acceleration at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct NewmarkState {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub a: DVector<f64>,
}

/// Newmark integrator for `M ü + C u̇ + K u = f` with diagonal `M` and the
/// effective stiffness factorized once.
pub struct NewmarkSolver {
    stiffness: DMatrix<f64>,
    mass: DVector<f64>,
    damping: Option<DMatrix<f64>>,
    factor: Cholesky<f64, Dyn>,
    cfg: NewmarkConfig,
    c: [f64; 6],
}

impl NewmarkSolver {
    pub fn new(stiffness: DMatrix<f64>, mass: &[f64], cfg: &NewmarkConfig) -> Result<Self> {
        cfg.validate()?;
        let n = mass.len();
        if stiffness.shape() != (n, n) {
            return Err(Error::dim(
                "stiffness",
                &[n, n],
                &[stiffness.nrows(), stiffness.ncols()],
            ));
        }
        if mass.iter().any(|&m| m.is_nan() || m <= 0.0) {
            return Err(Error::Numeric(
                "lumped mass has a non-positive entry".into(),
            ));
        }
        let (b, g, dt) = (cfg.beta, cfg.gamma, cfg.dt);
        let c = [
            1.0 / (b * dt * dt),
            g / (b * dt),
            1.0 / (b * dt),
            0.5 / b - 1.0,
            g / b - 1.0,
            0.5 * dt * (g / b - 2.0),
        ];
        let mass = DVector::from_column_slice(mass);
        let [alpha, beta_r] = cfg.rayleigh;
        let damping = (alpha != 0.0 || beta_r != 0.0).then(|| {
            let mut cm = &stiffness * beta_r;
            for i in 0..n {
                cm[(i, i)] += alpha * mass[i];
            }
            cm
        });
        let mut effective = stiffness.clone();
        for i in 0..n {
            effective[(i, i)] += c[0] * mass[i];
        }
        if let Some(cm) = &damping {
            effective += cm * c[1];
        }
        let factor = effective
            .cholesky()
            .ok_or_else(|| Error::Numeric("effective stiffness is not positive definite".into()))?;
        Ok(NewmarkSolver {
            stiffness,
            mass,
            damping,
            factor,
            cfg: cfg.clone(),
            c,
        })
    }

    pub fn dofs(&self) -> usize {
        self.mass.len()
    }

    pub fn config(&self) -> &NewmarkConfig {
        &self.cfg
    }

    /// State at `t = 0` with the acceleration from the equation of motion.
    pub fn initial_state(
        &self,
        u0: DVector<f64>,
        v0: DVector<f64>,
        f0: &DVector<f64>,
    ) -> Result<NewmarkState> {
        let n = self.dofs();
        if u0.len() != n || v0.len() != n || f0.len() != n {
            return Err(Error::dim("initial state", &[n], &[u0.len()]));
        }
        let mut r = f0 - &self.stiffness * &u0;
        if let Some(cm) = &self.damping {
            r -= cm * &v0;
        }
        let a = r.component_div(&self.mass);
        Ok(NewmarkState { u: u0, v: v0, a })
    }

    /// Advance `state` by one step under the load `f_next` at the new instant.
    pub fn step(&self, state: &mut NewmarkState, f_next: &DVector<f64>) -> Result<()> {
        let c = &self.c;
        let mut rhs = f_next.clone();
        for i in 0..self.dofs() {
            rhs[i] += self.mass[i] * (c[0] * state.u[i] + c[2] * state.v[i] + c[3] * state.a[i]);
        }
        if let Some(cm) = &self.damping {
            let w = &state.u * c[1] + &state.v * c[4] + &state.a * c[5];
            rhs += cm * w;
        }
        self.factor.solve_mut(&mut rhs);
        let g = self.cfg.gamma;
        let dt = self.cfg.dt;
        for i in 0..self.dofs() {
            let a_new = c[0] * (rhs[i] - state.u[i]) - c[2] * state.v[i] - c[3] * state.a[i];
            state.v[i] += dt * ((1.0 - g) * state.a[i] + g * a_new);
            state.a[i] = a_new;
            state.u[i] = rhs[i];
        }
        if !state.u.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("Newmark displacement".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_for_average_acceleration() {
        let s =
            NewmarkSolver::new(DMatrix::identity(1, 1), &[1.0], &NewmarkConfig::default()).unwrap();
        assert!((s.c[0] - 40000.0).abs() < 1e-9);
        assert!((s.c[1] - 200.0).abs() < 1e-12);
        assert_eq!(s.c[3], 1.0);
        assert_eq!(s.c[4], 1.0);
        assert_eq!(s.c[5], 0.0);
    }

    #[test]
    fn invalid_constants_rejected() {
        let cfg = NewmarkConfig {
            gamma: 0.3,
            ..NewmarkConfig::default()
        };
        assert!(NewmarkSolver::new(DMatrix::identity(1, 1), &[1.0], &cfg).is_err());
    }
}
