use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{PipelineConfig, SamplingMethod, Stage};
use super::dataset::SnapshotDataset;
use super::report::{
    ConvergenceCell, ConvergenceTable, CostLedger, McComparison, McReport, McSource, PdfRecord,
    ProbeReport, Profile, ValidationRow, ValidationTable,
};
use super::simulator::{ProbeSite, Simulator};
use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;
use crate::stats::{
    average_normalized_error, default_pdf_grid, normalized_error, pdf_estimate, MomentAccumulator,
    ParameterVector,
};
use crate::surrogate::{
    train_cae, train_ffnn, Cae, Ffnn, ModelCheckpoint, Surrogate, TrainingMetadata,
};

pub const DATASET_FILE: &str = "dataset.bin";
pub const CAE_FILE: &str = "cae.ckpt";
pub const FFNN_FILE: &str = "ffnn.ckpt";
pub const OFFLINE_LEDGER_FILE: &str = "offline_ledger.json";

/// Execution settings shared by every stage.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Workers for solver and prediction fan-out.
    pub threads: usize,
    /// Artifacts are written here as each stage completes.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: 1,
            out_dir: None,
        }
    }
}

impl RunOptions {
    fn artifact(&self, name: &str) -> Option<PathBuf> {
        self.out_dir.as_ref().map(|d| d.join(name))
    }

    fn prepare(&self) -> Result<()> {
        if let Some(d) = &self.out_dir {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        Ok(())
    }
}

fn timed<T>(
    ledger: &mut CostLedger,
    stage: &'static str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage))?;
    ledger.record(stage, start.elapsed().as_secs_f64());
    Ok(out)
}

/// Training design of the configured size and method.
pub fn sample_parameters(cfg: &PipelineConfig) -> Result<Vec<ParameterVector>> {
    let seed = cfg.stage_seed(Stage::Sampling);
    let space = &cfg.sampling.space;
    match cfg.sampling.method {
        SamplingMethod::Lhs => space.lhs(cfg.sampling.n, seed),
        SamplingMethod::Random => space.random(cfg.sampling.n, seed),
    }
}

/// Solve every training point and collect the snapshots.
pub fn build_dataset(
    cfg: &PipelineConfig,
    sim: &Simulator,
    thetas: &[ParameterVector],
    threads: usize,
) -> Result<SnapshotDataset> {
    let solutions = sim.solve_many(thetas, threads)?;
    SnapshotDataset::new(
        cfg.sampling.space.names.clone(),
        sim.fingerprint(),
        thetas.to_vec(),
        solutions,
    )
}

pub fn train_cae_stage(
    cfg: &PipelineConfig,
    dataset: &SnapshotDataset,
) -> Result<(Cae, ModelCheckpoint)> {
    let (d, n_t) = (dataset.header.d, dataset.header.n_t);
    cfg.validate_shapes(d, n_t)?;
    let arch = cfg.cae_architecture(d, n_t)?;
    let tc = cfg.cae_training();
    let (cae, report) = train_cae(&dataset.solutions, &arch, &tc)?;
    let ckpt = ModelCheckpoint::from_cae(&cae, TrainingMetadata::from_report(tc.seed, &report));
    Ok((cae, ckpt))
}

pub fn train_ffnn_stage(
    cfg: &PipelineConfig,
    dataset: &SnapshotDataset,
    cae: &Cae,
) -> Result<(Ffnn, ModelCheckpoint)> {
    let latents = cae.encode_batch(&dataset.solutions)?;
    let arch = cfg.ffnn_architecture(cae.latent_dim());
    if arch.outputs != cae.latent_dim() {
        return Err(Error::Compatibility(format!(
            "FFNN outputs {} values but the CAE latent dimension is {}",
            arch.outputs,
            cae.latent_dim()
        )));
    }
    let tc = cfg.ffnn_training();
    let (ffnn, report) = train_ffnn(&dataset.params, &latents, &arch, &tc)?;
    let ckpt = ModelCheckpoint::from_ffnn(&ffnn, TrainingMetadata::from_report(tc.seed, &report));
    Ok((ffnn, ckpt))
}

/// Everything the offline phase produces.
pub struct OfflineArtifacts {
    pub dataset: SnapshotDataset,
    pub cae_checkpoint: ModelCheckpoint,
    pub ffnn_checkpoint: ModelCheckpoint,
    pub surrogate: Surrogate,
    pub ledger: CostLedger,
}

/// Sample, solve, train the CAE, train the FFNN. Each artifact is written to
/// the output directory as soon as its stage finishes, so a failure leaves
/// the earlier ones in place.
pub fn offline_run(cfg: &PipelineConfig, opts: &RunOptions) -> Result<OfflineArtifacts> {
    cfg.validate()?;
    opts.prepare()?;
    let mut ledger = CostLedger::default();
    let sim = timed(&mut ledger, "setup", || {
        let sim = Simulator::from_config(cfg)?;
        let (d, n_t) = sim.output_shape();
        cfg.validate_shapes(d, n_t)?;
        Ok(sim)
    })?;
    let thetas = timed(&mut ledger, "sample", || sample_parameters(cfg))?;
    let dataset = timed(&mut ledger, "solve", || {
        let ds = build_dataset(cfg, &sim, &thetas, opts.threads)?;
        if let Some(p) = opts.artifact(DATASET_FILE) {
            ds.save(&p)?;
        }
        Ok(ds)
    })?;
    let (cae, cae_checkpoint) = timed(&mut ledger, "train-cae", || {
        let (cae, ckpt) = train_cae_stage(cfg, &dataset)?;
        if let Some(p) = opts.artifact(CAE_FILE) {
            ckpt.save(&p)?;
        }
        Ok((cae, ckpt))
    })?;
    let (ffnn, ffnn_checkpoint) = timed(&mut ledger, "train-ffnn", || {
        let (ffnn, ckpt) = train_ffnn_stage(cfg, &dataset, &cae)?;
        if let Some(p) = opts.artifact(FFNN_FILE) {
            ckpt.save(&p)?;
        }
        Ok((ffnn, ckpt))
    })?;
    if let Some(p) = opts.artifact(OFFLINE_LEDGER_FILE) {
        ledger.save(&p)?;
    }
    Ok(OfflineArtifacts {
        dataset,
        cae_checkpoint,
        ffnn_checkpoint,
        surrogate: Surrogate::new(cae, ffnn)?,
        ledger,
    })
}

/// Rebuild a surrogate from the two checkpoint files.
pub fn load_surrogate(cae: &Path, ffnn: &Path) -> Result<Surrogate> {
    Surrogate::new(
        ModelCheckpoint::load(cae)?.to_cae()?,
        ModelCheckpoint::load(ffnn)?.to_ffnn()?,
    )
}

/// Monte-Carlo design of the configured size; identical for surrogate and
/// exact runs.
pub fn mc_parameters(cfg: &PipelineConfig) -> Result<Vec<ParameterVector>> {
    if let Some(points) = &cfg.mc.points {
        return Ok(points
            .iter()
            .map(|p| ParameterVector::new(p.clone()))
            .collect());
    }
    let seed = cfg.stage_seed(Stage::MonteCarlo);
    let space = &cfg.sampling.space;
    match cfg.mc.method {
        SamplingMethod::Lhs => space.lhs(cfg.mc.n_mc, seed),
        SamplingMethod::Random => space.random(cfg.mc.n_mc, seed),
    }
}

fn probe_sites(cfg: &PipelineConfig, sim: &Simulator) -> Result<Vec<ProbeSite>> {
    let probes = cfg
        .mc
        .probes
        .clone()
        .unwrap_or_else(|| sim.default_probes());
    probes.iter().map(|p| sim.locate(p)).collect()
}

/// Stream `n_mc` solutions from `produce` through the moment accumulator,
/// keeping only the probe values.
fn run_mc(
    cfg: &PipelineConfig,
    sim: &Simulator,
    source: McSource,
    threads: usize,
    mut produce: impl FnMut(&[ParameterVector]) -> Result<Vec<(SolutionMatrix, bool)>>,
) -> Result<McReport> {
    let sites = probe_sites(cfg, sim)?;
    let (d, n_t) = sim.output_shape();
    let start = Instant::now();
    let thetas = mc_parameters(cfg)?;
    if thetas.len() < 2 {
        return Err(Error::Config(
            "Monte-Carlo statistics need at least two samples".into(),
        ));
    }
    let mut acc = MomentAccumulator::new(d, n_t);
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(thetas.len()); sites.len()];
    let mut out_of_range = 0;
    for chunk in thetas.chunks(cfg.mc.batch_size) {
        for (u, flagged) in produce(chunk)? {
            acc.push(&u)?;
            out_of_range += flagged as usize;
            for (s, site) in samples.iter_mut().zip(&sites) {
                s.push(u.get(site.dof, site.step));
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let mean = acc.mean();
    let variance = acc.variance()?;
    let probes = sites
        .iter()
        .zip(&samples)
        .map(|(site, s)| {
            let pdf = match default_pdf_grid(s, cfg.mc.pdf_points) {
                _ if s.len() < 100 => PdfRecord::Unavailable {
                    reason: format!("{} samples are too few for a density estimate", s.len()),
                },
                Some(grid) => pdf_estimate(s, &grid)?.into(),
                None => pdf_estimate(s, &[])?.into(),
            };
            Ok(ProbeReport {
                label: site.label.clone(),
                dof: site.dof,
                step: site.step,
                mean: mean.get(site.dof, site.step),
                variance: variance.get(site.dof, site.step),
                pdf,
            })
        })
        .collect::<Result<_>>()?;
    Ok(McReport {
        source,
        n_mc: thetas.len(),
        seed: cfg.stage_seed(Stage::MonteCarlo),
        threads,
        mean: (&mean).into(),
        variance: (&variance).into(),
        probes,
        out_of_range,
        seconds,
        per_simulation_seconds: seconds / thetas.len() as f64,
        comparison: None,
    })
}

/// Surrogate Monte Carlo: batched predictions, streamed statistics.
pub fn online_mc_run(
    cfg: &PipelineConfig,
    sim: &Simulator,
    surrogate: &Surrogate,
) -> Result<McReport> {
    if surrogate.cae.solution_shape() != sim.output_shape() {
        return Err(Error::Compatibility(format!(
            "surrogate predicts {:?} matrices, the problem has {:?}",
            surrogate.cae.solution_shape(),
            sim.output_shape()
        )));
    }
    run_mc(cfg, sim, McSource::Surrogate, 1, |thetas| {
        Ok(surrogate
            .predict_batch(thetas)?
            .into_iter()
            .map(|p| (p.solution, p.out_of_range))
            .collect())
    })
    .map_err(|e| e.in_stage("mc"))
}

/// Reference Monte Carlo with the full solver on the same draws.
pub fn exact_mc_run(cfg: &PipelineConfig, sim: &Simulator, opts: &RunOptions) -> Result<McReport> {
    run_mc(cfg, sim, McSource::Exact, opts.threads, |thetas| {
        Ok(sim
            .solve_many(thetas, opts.threads)?
            .into_iter()
            .map(|u| (u, false))
            .collect())
    })
    .map_err(|e| e.in_stage("exact-mc"))
}

/// Normalized errors of `surrogate` statistics against `exact` ones.
pub fn compare_mc(surrogate: &McReport, exact: &McReport) -> Result<McComparison> {
    Ok(McComparison {
        mean_error: normalized_error(&exact.mean_matrix()?, &surrogate.mean_matrix()?)?,
        variance_error: normalized_error(&exact.variance_matrix()?, &surrogate.variance_matrix()?)?,
    })
}

/// Solve each θ exactly and compare with the surrogate; failures are recorded
/// per row and do not stop the run.
pub fn validate_run(
    cfg: &PipelineConfig,
    sim: &Simulator,
    surrogate: &Surrogate,
    thetas: &[ParameterVector],
) -> ValidationTable {
    let time = sim.time_axis();
    let steps: Vec<usize> = cfg
        .validation
        .profile_times
        .iter()
        .map(|&t| {
            (0..time.len())
                .min_by(|&a, &b| (time[a] - t).abs().total_cmp(&(time[b] - t).abs()))
                .unwrap_or(0)
        })
        .collect();
    let rows = thetas
        .iter()
        .map(|theta| {
            let attempt = || -> Result<(f64, bool, Vec<Profile>)> {
                let exact = sim.solve(theta)?;
                let pred = surrogate.predict(theta)?;
                let err = normalized_error(&exact, &pred.solution)?;
                let profiles = steps
                    .iter()
                    .map(|&k| (k, exact.column(k), pred.solution.column(k)))
                    .collect();
                Ok((err, pred.out_of_range, profiles))
            };
            match attempt() {
                Ok((err, oor, profiles)) => ValidationRow {
                    theta: theta.values.clone(),
                    error: Some(err),
                    out_of_range: oor,
                    failure: None,
                    profiles,
                },
                Err(e) => ValidationRow {
                    theta: theta.values.clone(),
                    error: None,
                    out_of_range: false,
                    failure: Some(e.to_string()),
                    profiles: Vec::new(),
                },
            }
        })
        .collect();
    ValidationTable { rows }
}

/// Fixed random evaluation set for mean-error studies, with exact solutions.
pub fn evaluation_set(
    cfg: &PipelineConfig,
    sim: &Simulator,
    n: usize,
    threads: usize,
) -> Result<(Vec<ParameterVector>, Vec<SolutionMatrix>)> {
    let thetas = cfg
        .sampling
        .space
        .random(n, cfg.stage_seed(Stage::Evaluation))?;
    let sols = sim.solve_many(&thetas, threads)?;
    Ok((thetas, sols))
}

/// Mean normalized error of `surrogate` over an evaluation set.
pub fn mean_error(
    surrogate: &Surrogate,
    thetas: &[ParameterVector],
    exact: &[SolutionMatrix],
) -> Result<f64> {
    let preds: Vec<SolutionMatrix> = surrogate
        .predict_batch(thetas)?
        .into_iter()
        .map(|p| p.solution)
        .collect();
    average_normalized_error(exact, &preds)
}

/// Train one surrogate per `(l, N)` cell and report the mean error over a
/// shared evaluation set. Training sets are nested prefixes of one design of
/// the largest size; a failing cell is recorded and the study continues.
pub fn convergence_study(
    cfg: &PipelineConfig,
    latent_dims: &[usize],
    dataset_sizes: &[usize],
    opts: &RunOptions,
) -> Result<ConvergenceTable> {
    if latent_dims.is_empty() || dataset_sizes.is_empty() {
        return Err(Error::Config(
            "convergence study needs latent dims and dataset sizes".into(),
        ));
    }
    let sim = Simulator::from_config(cfg)?;
    let (d, n_t) = sim.output_shape();
    let n_max = *dataset_sizes.iter().max().expect("non-empty");
    let design = PipelineConfig {
        sampling: super::config::SamplingConfig {
            n: n_max,
            ..cfg.sampling.clone()
        },
        ..cfg.clone()
    };
    let thetas = sample_parameters(&design).map_err(|e| e.in_stage("sample"))?;
    let full = build_dataset(cfg, &sim, &thetas, opts.threads).map_err(|e| e.in_stage("solve"))?;
    let (eval_thetas, eval_exact) =
        evaluation_set(cfg, &sim, cfg.convergence.eval_samples, opts.threads)
            .map_err(|e| e.in_stage("evaluation"))?;
    let mut cells = Vec::new();
    for &n in dataset_sizes {
        for &l in latent_dims {
            let start = Instant::now();
            let cell = || -> Result<f64> {
                let dataset = full.head(n)?;
                let arch = cfg.cae_architecture(d, n_t)?.with_latent_dim(l)?;
                let mut cell_cfg = cfg.clone();
                cell_cfg.sampling.n = n;
                cell_cfg.cae.architecture = Some(arch);
                cell_cfg.ffnn.architecture = Some(cfg.ffnn_architecture(l).with_outputs(l));
                cell_cfg.cae.training.batch_size = cell_cfg.cae.training.batch_size.min(n);
                cell_cfg.ffnn.training.batch_size = cell_cfg.ffnn.training.batch_size.min(n);
                let (cae, _) = train_cae_stage(&cell_cfg, &dataset)?;
                let (ffnn, _) = train_ffnn_stage(&cell_cfg, &dataset, &cae)?;
                mean_error(&Surrogate::new(cae, ffnn)?, &eval_thetas, &eval_exact)
            };
            let result = cell();
            let seconds = start.elapsed().as_secs_f64();
            log::info!("convergence cell l={l} N={n}: {result:?} ({seconds:.1} s)");
            cells.push(match result {
                Ok(e) => ConvergenceCell {
                    latent_dim: l,
                    dataset_size: n,
                    mean_error: Some(e),
                    failure: None,
                    seconds,
                },
                Err(e) => ConvergenceCell {
                    latent_dim: l,
                    dataset_size: n,
                    mean_error: None,
                    failure: Some(e.to_string()),
                    seconds,
                },
            });
        }
    }
    Ok(ConvergenceTable { cells })
}
