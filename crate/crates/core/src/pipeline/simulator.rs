use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{GroundMotionSource, PipelineConfig, Probe, Problem};
use crate::burgers::{clamp_viscosity, solve_burgers, BurgersConfig};
use crate::elasticity::{
    build_wall_mesh, solve_elasticity, ElasticityParams, GroundMotion, NewmarkConfig, WallMesh,
};
use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;
use crate::stats::ParameterVector;

/// Full-order solver for one problem, parametrized by a [`ParameterVector`].
#[derive(Clone, Debug)]
pub enum Simulator {
    /// `θ = [ν]`.
    Burgers(BurgersConfig),
    /// `θ = [E_1, …, E_stories]`.
    Elasticity {
        mesh: Box<WallMesh>,
        material: ElasticityParams,
        motion: GroundMotion,
        newmark: NewmarkConfig,
    },
}

/// Matrix entry addressed by a probe, with a readable label.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSite {
    pub label: String,
    pub dof: usize,
    pub step: usize,
}

fn nearest(axis: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (i, &a) in axis.iter().enumerate() {
        if (a - v).abs() < (axis[best] - v).abs() {
            best = i;
        }
    }
    best
}

impl Simulator {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        match &cfg.problem {
            Problem::Burgers(p) => {
                p.solver.validate()?;
                Ok(Simulator::Burgers(p.solver.clone()))
            }
            Problem::Elasticity(p) => {
                let mesh = build_wall_mesh(&p.geometry)?;
                let motion = match &p.ground_motion {
                    GroundMotionSource::Synthetic {
                        n_steps,
                        dt,
                        pga,
                        seed,
                    } => GroundMotion::synthetic(*n_steps, *dt, *pga, *seed)?,
                    GroundMotionSource::Csv { path, n_steps } => {
                        let m = GroundMotion::load_csv(&cfg.resolve_path(path))?;
                        match n_steps {
                            Some(n) => m.truncated(*n)?,
                            None => m,
                        }
                    }
                };
                if (motion.dt - p.newmark.dt).abs() > 1e-9 * p.newmark.dt {
                    return Err(Error::Config(format!(
                        "ground motion dt {} differs from Newmark dt {}",
                        motion.dt, p.newmark.dt
                    )));
                }
                Ok(Simulator::Elasticity {
                    mesh: Box::new(mesh),
                    material: p.material.clone(),
                    motion,
                    newmark: p.newmark.clone(),
                })
            }
        }
    }

    pub fn parameter_dim(&self) -> usize {
        match self {
            Simulator::Burgers(_) => 1,
            Simulator::Elasticity { mesh, .. } => mesh.tags.iter().max().map_or(0, |t| t + 1),
        }
    }

    /// `(d, n_t)` of every solution.
    pub fn output_shape(&self) -> (usize, usize) {
        match self {
            Simulator::Burgers(c) => (c.n_x, c.n_t),
            Simulator::Elasticity { mesh, motion, .. } => (mesh.free_dofs(), motion.n_steps()),
        }
    }

    pub fn time_axis(&self) -> Vec<f64> {
        match self {
            Simulator::Burgers(c) => c.time_axis(),
            Simulator::Elasticity { motion, .. } => (0..motion.n_steps())
                .map(|k| k as f64 * motion.dt)
                .collect(),
        }
    }

    /// Stable digest of everything that determines the solution map.
    pub fn fingerprint(&self) -> String {
        let desc = match self {
            Simulator::Burgers(c) => serde_json::to_string(&BurgersConfig {
                nu: 0.0,
                ..c.clone()
            }),
            Simulator::Elasticity {
                mesh,
                material,
                motion,
                newmark,
            } => serde_json::to_string(&(mesh, material, motion, newmark)),
        }
        .expect("serializable solver description");
        let digest = Sha256::digest(desc.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn solve(&self, theta: &ParameterVector) -> Result<SolutionMatrix> {
        if theta.len() != self.parameter_dim() {
            return Err(Error::dim(
                "parameter vector",
                &[self.parameter_dim()],
                &[theta.len()],
            ));
        }
        match self {
            Simulator::Burgers(c) => solve_burgers(&BurgersConfig {
                nu: clamp_viscosity(theta.values[0]),
                ..c.clone()
            }),
            Simulator::Elasticity {
                mesh,
                material,
                motion,
                newmark,
            } => solve_elasticity(
                mesh,
                &ElasticityParams {
                    youngs: theta.values.clone(),
                    ..material.clone()
                },
                motion,
                newmark,
            ),
        }
    }

    /// Solve every `θ` on `threads` workers; results keep input order.
    pub fn solve_many(
        &self,
        thetas: &[ParameterVector],
        threads: usize,
    ) -> Result<Vec<SolutionMatrix>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| thetas.par_iter().map(|t| self.solve(t)).collect())
    }

    /// Problem-default probes: the two Burgers points at `t = 2.4747`, or the
    /// horizontal displacement of every monitored node at mid-record.
    pub fn default_probes(&self) -> Vec<Probe> {
        match self {
            Simulator::Burgers(_) => vec![
                Probe::Point {
                    x: -0.5075,
                    t: 2.4747,
                },
                Probe::Point {
                    x: 0.5075,
                    t: 2.4747,
                },
            ],
            Simulator::Elasticity { mesh, motion, .. } => (0..mesh.monitored.len())
                .map(|node| Probe::Monitored {
                    node,
                    component: 0,
                    t: 0.5 * motion.duration(),
                })
                .collect(),
        }
    }

    pub fn locate(&self, probe: &Probe) -> Result<ProbeSite> {
        let (d, n_t) = self.output_shape();
        let time = self.time_axis();
        let site = match (self, probe) {
            (Simulator::Burgers(c), Probe::Point { x, t }) => {
                let dof = nearest(&c.grid(), *x);
                let step = nearest(&time, *t);
                ProbeSite {
                    label: format!("x={x},t={t}"),
                    dof,
                    step,
                }
            }
            (Simulator::Elasticity { mesh, .. }, Probe::Monitored { node, component, t }) => {
                let id = *mesh
                    .monitored
                    .get(*node)
                    .ok_or_else(|| Error::Config(format!("no monitored node {node}")))?;
                let dof = mesh.dof(id, *component).ok_or_else(|| {
                    Error::Config(format!(
                        "monitored node {node} component {component} is fixed"
                    ))
                })?;
                ProbeSite {
                    label: format!(
                        "node{node}.{},t={t}",
                        if *component == 0 { "x" } else { "y" }
                    ),
                    dof,
                    step: nearest(&time, *t),
                }
            }
            (_, Probe::Entry { dof, step }) => ProbeSite {
                label: format!("dof={dof},step={step}"),
                dof: *dof,
                step: *step,
            },
            (_, other) => {
                return Err(Error::Config(format!(
                    "probe {other:?} does not apply to this problem"
                )))
            }
        };
        if site.dof >= d || site.step >= n_t {
            return Err(Error::Config(format!(
                "probe {probe:?} lies outside the {d} × {n_t} solution"
            )));
        }
        Ok(site)
    }
}
