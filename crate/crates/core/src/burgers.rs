//! Finite-difference solver for the viscous 1-D Burgers equation
//! `u_t + u u_x = ν u_xx` on `[x_min, x_max]` with `u(x, 0) = −sin(πx)` and
//! homogeneous Dirichlet ends.
//!
//! Space: central second differences for diffusion, first-order upwind for
//! convection. Time: implicit BDF2 started with one backward-Euler step. Each
//! step's nonlinear system is solved by Picard iteration with the convection
//! coefficient lagged, so every iterate is a tridiagonal solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;

/// Lower viscosity bound accepted by the solver.
pub const NU_MIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurgersConfig {
    /// Viscosity; replaced by the sampled value in parametric runs.
    #[serde(default = "defaults::nu")]
    pub nu: f64,
    #[serde(default = "defaults::x_min")]
    pub x_min: f64,
    #[serde(default = "defaults::x_max")]
    pub x_max: f64,
    #[serde(default = "defaults::t_max")]
    pub t_max: f64,
    /// Grid points including both boundary nodes; the spacing is derived.
    #[serde(default = "defaults::n_x")]
    pub n_x: usize,
    /// Time instants including `t = 0`; the step is derived.
    #[serde(default = "defaults::n_t")]
    pub n_t: usize,
    #[serde(default = "defaults::tol")]
    pub tolerance: f64,
    #[serde(default = "defaults::max_iter")]
    pub max_iterations: usize,
}

mod defaults {
    pub fn nu() -> f64 {
        0.5
    }
    pub fn x_min() -> f64 {
        -1.0
    }
    pub fn x_max() -> f64 {
        1.0
    }
    pub fn t_max() -> f64 {
        5.0
    }
    pub fn n_x() -> usize {
        200
    }
    pub fn n_t() -> usize {
        100
    }
    pub fn tol() -> f64 {
        1e-10
    }
    pub fn max_iter() -> usize {
        50
    }
}

impl Default for BurgersConfig {
    fn default() -> Self {
        BurgersConfig::with_nu(defaults::nu())
    }
}

impl BurgersConfig {
    pub fn with_nu(nu: f64) -> Self {
        BurgersConfig {
            nu,
            x_min: defaults::x_min(),
            x_max: defaults::x_max(),
            t_max: defaults::t_max(),
            n_x: defaults::n_x(),
            n_t: defaults::n_t(),
            tolerance: defaults::tol(),
            max_iterations: defaults::max_iter(),
        }
    }

    /// Same domain, `factor`× more intervals in both space and time.
    pub fn refined(&self, factor: usize) -> Self {
        BurgersConfig {
            n_x: (self.n_x - 1) * factor + 1,
            n_t: (self.n_t - 1) * factor + 1,
            ..self.clone()
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_max / (self.n_t - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_x).map(|i| self.x_min + i as f64 * dx).collect()
    }

    pub fn time_axis(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_t).map(|k| k as f64 * dt).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(NU_MIN..=1.0).contains(&self.nu) {
            return Err(Error::Config(format!(
                "viscosity {} outside [{NU_MIN}, 1]",
                self.nu
            )));
        }
        if self.n_x < 3 || self.n_t < 2 {
            return Err(Error::Config(
                "burgers grid needs n_x ≥ 3 and n_t ≥ 2".into(),
            ));
        }
        if self.x_max.is_nan()
            || self.x_max <= self.x_min
            || self.t_max.is_nan()
            || self.t_max <= 0.0
        {
            return Err(Error::Config(
                "burgers domain must have positive extent".into(),
            ));
        }
        Ok(())
    }

    pub fn initial_condition(&self) -> Vec<f64> {
        let mut u: Vec<f64> = self
            .grid()
            .iter()
            .map(|&x| -(std::f64::consts::PI * x).sin())
            .collect();
        let n = u.len();
        u[0] = 0.0;
        u[n - 1] = 0.0;
        u
    }
}

/// Clamp a sampled viscosity into the solvable range, logging the event.
pub fn clamp_viscosity(nu: f64) -> f64 {
    if nu < NU_MIN {
        log::info!("viscosity {nu:e} clamped to {NU_MIN:e}");
        NU_MIN
    } else if nu > 1.0 {
        log::info!("viscosity {nu} clamped to 1");
        1.0
    } else {
        nu
    }
}

/// Time-history terms of one implicit step: `c0·u_next − history` approximates `dt·u_t`.
struct StepHistory {
    c0: f64,
    history: Vec<f64>,
}

impl StepHistory {
    fn new(u_prev: &[f64], u_prev2: Option<&[f64]>) -> Self {
        match u_prev2 {
            None => StepHistory {
                c0: 1.0,
                history: u_prev.to_vec(),
            },
            Some(older) => StepHistory {
                c0: 1.5,
                history: u_prev
                    .iter()
                    .zip(older)
                    .map(|(&a, &b)| 2.0 * a - 0.5 * b)
                    .collect(),
            },
        }
    }
}

/// Residual of the discrete step equations for a candidate `u_next`.
///
/// With `u_prev2 = None` the step is backward Euler, otherwise BDF2. Boundary
/// rows enforce `u = 0`. The residual is scaled by `dt`, i.e. it has the
/// units of `u`.
pub fn burgers_residual(
    u_prev: &[f64],
    u_prev2: Option<&[f64]>,
    u_next: &[f64],
    config: &BurgersConfig,
) -> Result<Vec<f64>> {
    let n = config.n_x;
    for v in [Some(u_prev), u_prev2, Some(u_next)].into_iter().flatten() {
        if v.len() != n {
            return Err(Error::dim("burgers state", &[n], &[v.len()]));
        }
    }
    let step = StepHistory::new(u_prev, u_prev2);
    let (dt, dx) = (config.dt(), config.dx());
    let diff = dt * config.nu / (dx * dx);
    let conv = dt / dx;
    let mut r = vec![0.0; n];
    r[0] = u_next[0];
    r[n - 1] = u_next[n - 1];
    for i in 1..n - 1 {
        let (ul, u, ur) = (u_next[i - 1], u_next[i], u_next[i + 1]);
        let advect = u.max(0.0) * (u - ul) + u.min(0.0) * (ur - u);
        r[i] = step.c0 * u - step.history[i] + conv * advect - diff * (ur - 2.0 * u + ul);
    }
    Ok(r)
}

/// Thomas algorithm for `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Numeric("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::Numeric("singular tridiagonal system".into()));
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Advance one implicit step from `u_prev` (and `u_prev2` for BDF2).
pub fn burgers_step(
    u_prev: &[f64],
    u_prev2: Option<&[f64]>,
    config: &BurgersConfig,
    step_index: usize,
) -> Result<Vec<f64>> {
    let n = config.n_x;
    let step = StepHistory::new(u_prev, u_prev2);
    let (dt, dx) = (config.dt(), config.dx());
    let diff = dt * config.nu / (dx * dx);
    let conv = dt / dx;

    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = step.history.clone();
    rhs[0] = 0.0;
    rhs[n - 1] = 0.0;

    let mut u = u_prev.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..config.max_iterations {
        for i in 1..n - 1 {
            let ap = u[i].max(0.0);
            let am = u[i].min(0.0);
            lower[i] = -diff - conv * ap;
            upper[i] = -diff + conv * am;
            diag[i] = step.c0 + 2.0 * diff + conv * (ap - am);
        }
        u = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
        residual = max_norm(&burgers_residual(u_prev, u_prev2, &u, config)?);
        if residual <= config.tolerance {
            return Ok(u);
        }
        if !residual.is_finite() {
            break;
        }
    }
    Err(Error::Convergence {
        step: step_index,
        residual,
    })
}

/// Solve the full time history. Rows are grid points, columns time instants.
pub fn solve_burgers(config: &BurgersConfig) -> Result<SolutionMatrix> {
    config.validate()?;
    let mut columns = Vec::with_capacity(config.n_t);
    columns.push(config.initial_condition());
    for k in 1..config.n_t {
        let prev2 = if k >= 2 {
            Some(columns[k - 2].as_slice())
        } else {
            None
        };
        let next = burgers_step(&columns[k - 1], prev2, config, k)?;
        columns.push(next);
    }
    let labels = config.grid().iter().map(|x| format!("x={x:.6}")).collect();
    Ok(SolutionMatrix::from_columns(config.n_x, &columns)?
        .with_time_axis(config.time_axis())
        .with_dof_labels(labels))
}
