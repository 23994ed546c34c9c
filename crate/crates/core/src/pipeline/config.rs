use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::burgers::BurgersConfig;
use crate::elasticity::{ElasticityParams, NewmarkConfig, WallGeometry};
use crate::error::{Error, Result};
use crate::stats::{substream, ParameterSpace};
use crate::surrogate::{CaeArchitecture, FfnnArchitecture, TrainConfig};

/// One complete experiment: problem, design, networks and Monte-Carlo study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; every stage derives its own stream from it.
    #[serde(default)]
    pub seed: u64,
    pub problem: Problem,
    pub sampling: SamplingConfig,
    pub cae: CaeSection,
    pub ffnn: FfnnSection,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    Burgers(BurgersProblem),
    Elasticity(ElasticityProblem),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurgersProblem {
    /// Grid and iteration settings; `nu` is taken from the sample.
    #[serde(default)]
    pub solver: BurgersConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticityProblem {
    #[serde(default)]
    pub geometry: WallGeometry,
    /// Material constants; `youngs` is taken from the sample.
    #[serde(default)]
    pub material: ElasticityParams,
    #[serde(default)]
    pub newmark: NewmarkConfig,
    pub ground_motion: GroundMotionSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundMotionSource {
    /// Band-limited random record scaled to `pga` (m/s²).
    Synthetic {
        n_steps: usize,
        dt: f64,
        pga: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `t,accel` CSV, optionally truncated to its first `n_steps` samples.
    Csv {
        path: PathBuf,
        #[serde(default)]
        n_steps: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    #[default]
    Lhs,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub n: usize,
    #[serde(default)]
    pub method: SamplingMethod,
    pub space: ParameterSpace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaeSection {
    /// Explicit layer stack; overrides `mirrored`.
    #[serde(default)]
    pub architecture: Option<CaeArchitecture>,
    /// Two-stage mirrored stack sized to the problem; problem default when omitted.
    #[serde(default)]
    pub mirrored: Option<MirroredCae>,
    pub training: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirroredCae {
    pub filters: [usize; 2],
    pub kernel: usize,
    #[serde(default)]
    pub pool: Option<usize>,
    pub latent_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FfnnSection {
    #[serde(default)]
    pub architecture: Option<FfnnArchitecture>,
    /// Hidden widths for the problem's input count; ignored with `architecture`.
    #[serde(default)]
    pub hidden: Option<Vec<usize>>,
    pub training: TrainConfig,
}

/// Location at which the ensemble distribution is estimated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "snake_case", deny_unknown_fields)]
pub enum Probe {
    /// Nearest grid point to `(x, t)` of a 1-D field.
    Point { x: f64, t: f64 },
    /// Displacement `component` (0 horizontal, 1 vertical) of monitored node
    /// `node` at the nearest instant to `t`.
    Monitored {
        node: usize,
        component: usize,
        t: f64,
    },
    /// Raw matrix entry.
    Entry { dof: usize, step: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "defaults::n_mc")]
    pub n_mc: usize,
    #[serde(default = "defaults::mc_method")]
    pub method: SamplingMethod,
    /// Predictions per decoder call.
    #[serde(default = "defaults::batch")]
    pub batch_size: usize,
    /// Problem defaults when omitted.
    #[serde(default)]
    pub probes: Option<Vec<Probe>>,
    #[serde(default = "defaults::pdf_points")]
    pub pdf_points: usize,
    /// Explicit ensemble replacing the drawn design; `n_mc` is then ignored.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_mc: defaults::n_mc(),
            method: defaults::mc_method(),
            batch_size: defaults::batch(),
            probes: None,
            pdf_points: defaults::pdf_points(),
            points: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    /// Parameter vectors compared against the full solver.
    #[serde(default)]
    pub thetas: Vec<Vec<f64>>,
    /// Instants whose spatial profiles are extracted.
    #[serde(default)]
    pub profile_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "defaults::latent_dims")]
    pub latent_dims: Vec<usize>,
    #[serde(default = "defaults::dataset_sizes")]
    pub dataset_sizes: Vec<usize>,
    /// Size of the fixed random evaluation set.
    #[serde(default = "defaults::eval_samples")]
    pub eval_samples: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            latent_dims: defaults::latent_dims(),
            dataset_sizes: defaults::dataset_sizes(),
            eval_samples: defaults::eval_samples(),
        }
    }
}

mod defaults {
    use super::SamplingMethod;

    pub fn n_mc() -> usize {
        3000
    }
    pub fn mc_method() -> SamplingMethod {
        SamplingMethod::Random
    }
    pub fn batch() -> usize {
        64
    }
    pub fn pdf_points() -> usize {
        200
    }
    pub fn latent_dims() -> Vec<usize> {
        vec![2, 4, 8]
    }
    pub fn dataset_sizes() -> Vec<usize> {
        vec![25, 50, 100]
    }
    pub fn eval_samples() -> usize {
        100
    }
}

/// Stage identifiers for seed derivation.
#[derive(Clone, Copy, Debug)]
pub enum Stage {
    Sampling,
    Training,
    MonteCarlo,
    Evaluation,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Parse and validate; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Independent seed for one stage, derived from the root seed.
    pub fn stage_seed(&self, stage: Stage) -> u64 {
        substream(self.seed, u64::MAX - stage as u64).random()
    }

    /// Number of uncertain parameters the problem consumes.
    pub fn parameter_dim(&self) -> usize {
        match &self.problem {
            Problem::Burgers(_) => 1,
            Problem::Elasticity(p) => p.geometry.story_heights.len(),
        }
    }

    /// Declared CAE stack, or the problem default for `(d, n_t)`.
    pub fn cae_architecture(&self, dofs: usize, steps: usize) -> Result<CaeArchitecture> {
        match (&self.cae.architecture, &self.cae.mirrored, &self.problem) {
            (Some(a), _, _) => Ok(a.clone()),
            (None, Some(m), _) => {
                CaeArchitecture::mirrored(dofs, steps, m.filters, m.kernel, m.pool, m.latent_dim)
            }
            (None, None, Problem::Burgers(_)) => {
                CaeArchitecture::mirrored(dofs, steps, [64, 32], 5, None, 8)
            }
            (None, None, Problem::Elasticity(_)) => {
                CaeArchitecture::mirrored(dofs, steps, [256, 128], 5, None, 64)
            }
        }
    }

    pub fn ffnn_architecture(&self, latent_dim: usize) -> FfnnArchitecture {
        match (&self.ffnn.architecture, &self.ffnn.hidden, &self.problem) {
            (Some(a), _, _) => a.clone(),
            (None, Some(h), _) => {
                FfnnArchitecture::new(self.parameter_dim(), h.clone(), latent_dim)
            }
            (None, None, Problem::Burgers(_)) => FfnnArchitecture::new(1, vec![32; 4], latent_dim),
            (None, None, Problem::Elasticity(_)) => {
                FfnnArchitecture::new(self.parameter_dim(), vec![256; 6], latent_dim)
            }
        }
    }

    /// Training schedules with the pipeline's training seed.
    pub fn cae_training(&self) -> TrainConfig {
        TrainConfig {
            seed: self.stage_seed(Stage::Training),
            ..self.cae.training.clone()
        }
    }

    pub fn ffnn_training(&self) -> TrainConfig {
        TrainConfig {
            seed: self.stage_seed(Stage::Training),
            ..self.ffnn.training.clone()
        }
    }

    /// Field-level and cross-field checks that need no solver output.
    pub fn validate(&self) -> Result<()> {
        self.sampling.space.validate()?;
        let dim = self.parameter_dim();
        if self.sampling.space.dim() != dim {
            return Err(Error::Config(format!(
                "problem takes {dim} parameters but the sampling space has {}",
                self.sampling.space.dim()
            )));
        }
        if self.sampling.n == 0 {
            return Err(Error::Config("sampling.n must be ≥ 1".into()));
        }
        self.cae.training.validate(self.sampling.n)?;
        self.ffnn.training.validate(self.sampling.n)?;
        match &self.problem {
            Problem::Burgers(p) => BurgersConfig {
                nu: 0.5,
                ..p.solver.clone()
            }
            .validate()?,
            Problem::Elasticity(p) => {
                p.newmark.validate()?;
                ElasticityParams {
                    youngs: vec![1.0; dim],
                    ..p.material.clone()
                }
                .validate()?;
                if let GroundMotionSource::Synthetic {
                    n_steps, dt, pga, ..
                } = p.ground_motion
                {
                    if n_steps < 2 || pga.is_nan() || pga <= 0.0 {
                        return Err(Error::Config(
                            "synthetic ground motion needs ≥ 2 steps and pga > 0".into(),
                        ));
                    }
                    if (dt - p.newmark.dt).abs() > 1e-9 * dt {
                        return Err(Error::Config(format!(
                            "ground motion dt {dt} differs from Newmark dt {}",
                            p.newmark.dt
                        )));
                    }
                }
            }
        }
        if self.mc.n_mc == 0 || self.mc.batch_size == 0 {
            return Err(Error::Config(
                "mc.n_mc and mc.batch_size must be ≥ 1".into(),
            ));
        }
        if let Some(bad) = self.mc.points.iter().flatten().find(|t| t.len() != dim) {
            return Err(Error::Config(format!(
                "mc point {bad:?} has {} entries, expected {dim}",
                bad.len()
            )));
        }
        if let Some(bad) = self.validation.thetas.iter().find(|t| t.len() != dim) {
            return Err(Error::Config(format!(
                "validation theta {bad:?} has {} entries, expected {dim}",
                bad.len()
            )));
        }
        if self.convergence.latent_dims.contains(&0) || self.convergence.dataset_sizes.contains(&0)
        {
            return Err(Error::Config("convergence sizes must be ≥ 1".into()));
        }
        if let Some(a) = &self.ffnn.architecture {
            a.validate()?;
            if a.inputs != dim {
                return Err(Error::Config(format!(
                    "FFNN takes {} inputs, problem has {dim}",
                    a.inputs
                )));
            }
        }
        if let Some(a) = &self.cae.architecture {
            a.resolve()?;
            if let Some(f) = &self.ffnn.architecture {
                if f.outputs != a.latent_dim {
                    return Err(Error::Config(format!(
                        "FFNN outputs {} values but the CAE latent dimension is {}",
                        f.outputs, a.latent_dim
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks against the solver output shape `(d, n_t)`.
    pub fn validate_shapes(&self, dofs: usize, steps: usize) -> Result<()> {
        let arch = self.cae_architecture(dofs, steps)?;
        if (arch.channels, arch.length) != (dofs, steps) {
            return Err(Error::Config(format!(
                "CAE expects {} × {} matrices but the solver produces {dofs} × {steps}",
                arch.channels, arch.length
            )));
        }
        arch.resolve()?;
        let ffnn = self.ffnn_architecture(arch.latent_dim);
        if ffnn.outputs != arch.latent_dim {
            return Err(Error::Config(format!(
                "FFNN outputs {} values but the CAE latent dimension is {}",
                ffnn.outputs, arch.latent_dim
            )));
        }
        Ok(())
    }
}
