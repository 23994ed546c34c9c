//! Command-line front end for the offline and online surrogate phases.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use caerom::pipeline::{
    build_dataset, compare_mc, convergence_study, exact_mc_run, load_surrogate, online_mc_run,
    report_emit, sample_parameters, train_cae_stage, train_ffnn_stage, validate_run,
    write_matrix_csv, McReport, PipelineConfig, RunOptions, Simulator, SnapshotDataset, CAE_FILE,
    DATASET_FILE, FFNN_FILE,
};
use caerom::stats::ParameterVector;
use caerom::surrogate::Surrogate;
use caerom::{Error, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "caerom",
    version,
    about = "Autoencoder reduced-order surrogates for parametrized PDEs"
)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the root seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for solver fan-out.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the training design and write `params.csv`.
    Sample,
    /// Solve every training point and write the snapshot dataset.
    Solve {
        /// Design to solve instead of sampling (`params.csv` layout).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Train the autoencoder on a dataset.
    TrainCae {
        /// Snapshot dataset [default: <out>/dataset.bin].
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train the parameter-to-latent network.
    TrainFfnn {
        /// Snapshot dataset [default: <out>/dataset.bin].
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Autoencoder checkpoint [default: <out>/cae.ckpt].
        #[arg(long)]
        cae: Option<PathBuf>,
    },
    /// Predict one solution matrix.
    Predict {
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        theta: Vec<f64>,
        /// Autoencoder checkpoint [default: <out>/cae.ckpt].
        #[arg(long)]
        cae: Option<PathBuf>,
        /// Parameter-to-latent checkpoint [default: <out>/ffnn.ckpt].
        #[arg(long)]
        ffnn: Option<PathBuf>,
    },
    /// Surrogate Monte Carlo; `--exact` adds the full-solver reference.
    Mc {
        /// Autoencoder checkpoint [default: <out>/cae.ckpt].
        #[arg(long)]
        cae: Option<PathBuf>,
        /// Parameter-to-latent checkpoint [default: <out>/ffnn.ckpt].
        #[arg(long)]
        ffnn: Option<PathBuf>,
        /// Also run the full solver on the same ensemble and compare.
        #[arg(long)]
        exact: bool,
    },
    /// Compare surrogate and solver at the configured validation points.
    Validate {
        /// Autoencoder checkpoint [default: <out>/cae.ckpt].
        #[arg(long)]
        cae: Option<PathBuf>,
        /// Parameter-to-latent checkpoint [default: <out>/ffnn.ckpt].
        #[arg(long)]
        ffnn: Option<PathBuf>,
    },
    /// Mean error over latent dimensions and dataset sizes.
    Converge,
    /// Re-emit the CSV files of a saved Monte-Carlo summary.
    Report {
        /// Saved `summary.json` of an earlier `mc` run.
        #[arg(long)]
        summary: PathBuf,
    },
}

struct Context {
    cli_out: PathBuf,
    threads: usize,
    config: Option<PipelineConfig>,
}

impl Context {
    fn config(&self) -> Result<&PipelineConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs --config".into()))
    }

    fn path(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.cli_out.join(default))
    }

    fn opts(&self) -> RunOptions {
        RunOptions {
            threads: self.threads,
            out_dir: Some(self.cli_out.clone()),
        }
    }

    fn ensure_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.cli_out).map_err(|e| Error::io(&self.cli_out, e))
    }

    fn surrogate(&self, cae: &Option<PathBuf>, ffnn: &Option<PathBuf>) -> Result<Surrogate> {
        load_surrogate(&self.path(cae, CAE_FILE), &self.path(ffnn, FFNN_FILE))
    }
}

fn write_params(path: &Path, names: &[String], thetas: &[ParameterVector]) -> Result<()> {
    let err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(names).map_err(err)?;
    for t in thetas {
        w.write_record(t.values.iter().map(|v| v.to_string()))
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_params(path: &Path, names: &[String]) -> Result<Vec<ParameterVector>> {
    let err = |e: csv::Error| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
        _ => Error::Format(format!("{}: {e}", path.display())),
    };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let header: Vec<String> = r
        .headers()
        .map_err(err)?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != names {
        return Err(Error::Format(format!(
            "{}: columns {header:?} do not match parameters {names:?}",
            path.display()
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(err)?;
            rec.iter()
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("{}: bad number `{v}`", path.display())))
                })
                .collect::<Result<Vec<_>>>()
                .map(ParameterVector::new)
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => {
            let mut cfg = PipelineConfig::load(p)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            Some(cfg)
        }
        None => None,
    };
    let ctx = Context {
        cli_out: cli.out.clone(),
        threads: cli.threads.max(1),
        config,
    };
    match &cli.command {
        Command::Sample => {
            let cfg = ctx.config()?;
            ctx.ensure_out()?;
            let thetas = sample_parameters(cfg)?;
            let path = ctx.cli_out.join("params.csv");
            write_params(&path, &cfg.sampling.space.names, &thetas)?;
            println!("{} samples -> {}", thetas.len(), path.display());
        }
        Command::Solve { params } => {
            let cfg = ctx.config()?;
            ctx.ensure_out()?;
            let sim = Simulator::from_config(cfg)?;
            let (d, n_t) = sim.output_shape();
            cfg.validate_shapes(d, n_t)?;
            let thetas = match params {
                Some(p) => read_params(p, &cfg.sampling.space.names)?,
                None => sample_parameters(cfg)?,
            };
            let ds = build_dataset(cfg, &sim, &thetas, ctx.threads)?;
            let path = ctx.cli_out.join(DATASET_FILE);
            ds.save(&path)?;
            println!(
                "dataset ({}, {}, {}) checksum {:016x} -> {}",
                ds.header.n,
                ds.header.d,
                ds.header.n_t,
                ds.checksum()?,
                path.display()
            );
        }
        Command::TrainCae { dataset } => {
            let cfg = ctx.config()?;
            ctx.ensure_out()?;
            let ds = SnapshotDataset::load(&ctx.path(dataset, DATASET_FILE))?;
            let (_, ckpt) = train_cae_stage(cfg, &ds)?;
            let path = ctx.cli_out.join(CAE_FILE);
            ckpt.save(&path)?;
            println!(
                "final loss {} -> {}",
                loss_text(ckpt.metadata.final_loss),
                path.display()
            );
        }
        Command::TrainFfnn { dataset, cae } => {
            let cfg = ctx.config()?;
            ctx.ensure_out()?;
            let ds = SnapshotDataset::load(&ctx.path(dataset, DATASET_FILE))?;
            let cae =
                caerom::surrogate::ModelCheckpoint::load(&ctx.path(cae, CAE_FILE))?.to_cae()?;
            let (_, ckpt) = train_ffnn_stage(cfg, &ds, &cae)?;
            let path = ctx.cli_out.join(FFNN_FILE);
            ckpt.save(&path)?;
            println!(
                "final loss {} -> {}",
                loss_text(ckpt.metadata.final_loss),
                path.display()
            );
        }
        Command::Predict { theta, cae, ffnn } => {
            let sur = ctx.surrogate(cae, ffnn)?;
            ctx.ensure_out()?;
            let p = sur.predict(&ParameterVector::new(theta.clone()))?;
            if p.out_of_range {
                log::warn!("theta {theta:?} lies outside the training range");
            }
            let path = ctx.cli_out.join("prediction.csv");
            write_matrix_csv(&path, &p.solution)?;
            println!("out_of_range={} -> {}", p.out_of_range, path.display());
        }
        Command::Mc { cae, ffnn, exact } => {
            let cfg = ctx.config()?;
            let sim = Simulator::from_config(cfg)?;
            let sur = ctx.surrogate(cae, ffnn)?;
            let mut report = online_mc_run(cfg, &sim, &sur)?;
            if *exact {
                let reference = exact_mc_run(cfg, &sim, &ctx.opts())?;
                report.comparison = Some(compare_mc(&report, &reference)?);
                report_emit(&reference, None, &ctx.cli_out.join("mc_exact"))?;
            }
            report_emit(&report, None, &ctx.cli_out.join("mc"))?;
            println!(
                "{} predictions, {:.3e} s each, {} out of range",
                report.n_mc, report.per_simulation_seconds, report.out_of_range
            );
            if let Some(c) = report.comparison {
                println!(
                    "mean error {:.4}, variance error {:.4}",
                    c.mean_error, c.variance_error
                );
            }
        }
        Command::Validate { cae, ffnn } => {
            let cfg = ctx.config()?;
            let sim = Simulator::from_config(cfg)?;
            let sur = ctx.surrogate(cae, ffnn)?;
            let thetas: Vec<_> = cfg
                .validation
                .thetas
                .iter()
                .map(|t| ParameterVector::new(t.clone()))
                .collect();
            let table = validate_run(cfg, &sim, &sur, &thetas);
            table.write(&ctx.cli_out.join("validation"))?;
            for r in &table.rows {
                match (&r.error, &r.failure) {
                    (Some(e), _) => println!("{:?}: {e:.5}", r.theta),
                    (_, Some(f)) => println!("{:?}: failed: {f}", r.theta),
                    _ => {}
                }
            }
        }
        Command::Converge => {
            let cfg = ctx.config()?;
            ctx.ensure_out()?;
            let table = convergence_study(
                cfg,
                &cfg.convergence.latent_dims,
                &cfg.convergence.dataset_sizes,
                &ctx.opts(),
            )?;
            let path = ctx.cli_out.join("convergence.csv");
            table.write_csv(&path)?;
            for c in &table.cells {
                println!(
                    "l={} N={}: {:?}",
                    c.latent_dim, c.dataset_size, c.mean_error
                );
            }
        }
        Command::Report { summary } => {
            let report = McReport::load(summary)?;
            let files = report_emit(&report, None, &ctx.cli_out)?;
            println!("{} files -> {}", files.len(), ctx.cli_out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn loss_text(loss: Option<f64>) -> String {
    loss.map_or_else(|| "n/a".into(), |l| format!("{l:.6e}"))
}
