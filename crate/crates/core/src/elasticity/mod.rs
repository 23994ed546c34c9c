//! Plane-stress finite elements for a coupled shear wall under horizontal
//! ground acceleration: bilinear quadrilaterals with 2×2 Gauss quadrature,
//! lumped mass, and Newmark time integration of `M ü + C u̇ + K u = −M ι a_g`.

mod assembly;
mod ground_motion;
mod mesh;
mod newmark;

pub use assembly::{assemble_system, ElasticityParams, StructuralSystem};
pub use ground_motion::GroundMotion;
pub use mesh::{build_wall_mesh, WallGeometry, WallMesh};
pub use newmark::{NewmarkConfig, NewmarkSolver, NewmarkState};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;

/// Displacement history under `motion` from rest. Column `k` is `t = k·dt`.
pub fn newmark_integrate(
    system: &StructuralSystem,
    motion: &GroundMotion,
    cfg: &NewmarkConfig,
) -> Result<SolutionMatrix> {
    if (motion.dt - cfg.dt).abs() > 1e-9 * cfg.dt {
        return Err(Error::Config(format!(
            "ground motion dt {} differs from integrator dt {}",
            motion.dt, cfg.dt
        )));
    }
    let n = system.mass.len();
    let solver = NewmarkSolver::new(system.stiffness.clone(), &system.mass, cfg)?;
    let inertia: DVector<f64> = DVector::from_iterator(
        n,
        system
            .mass
            .iter()
            .zip(&system.influence)
            .map(|(m, i)| -m * i),
    );
    let body = DVector::from_column_slice(&system.body_load);
    let load = |k: usize| &inertia * motion.accel[k] + &body;

    let steps = motion.n_steps();
    let mut values = vec![0.0; n * steps];
    let mut state = solver.initial_state(DVector::zeros(n), DVector::zeros(n), &load(0))?;
    for k in 1..steps {
        solver.step(&mut state, &load(k))?;
        for (i, &u) in state.u.iter().enumerate() {
            values[i * steps + k] = u;
        }
    }
    let time_axis = (0..steps).map(|k| k as f64 * cfg.dt).collect();
    Ok(SolutionMatrix::new(n, steps, values)?.with_time_axis(time_axis))
}

/// Assemble and integrate one parameter instance.
pub fn solve_elasticity(
    mesh: &WallMesh,
    params: &ElasticityParams,
    motion: &GroundMotion,
    cfg: &NewmarkConfig,
) -> Result<SolutionMatrix> {
    let system = assemble_system(mesh, params)?;
    Ok(newmark_integrate(&system, motion, cfg)?.with_dof_labels(mesh.dof_labels()))
}
