//! Offline (sample, solve, train) and online (predict, statistics, report)
//! phases, their persisted artifacts, and the experiment configuration.

mod config;
mod dataset;
pub mod hexfloat;
mod report;
mod run;
mod simulator;

pub use config::{
    BurgersProblem, CaeSection, ConvergenceConfig, ElasticityProblem, FfnnSection,
    GroundMotionSource, McConfig, MirroredCae, PipelineConfig, Probe, Problem, SamplingConfig,
    SamplingMethod, Stage, ValidationConfig,
};
pub use dataset::{DatasetHeader, SnapshotDataset, DATASET_VERSION};
pub use report::{
    report_emit, write_matrix_csv, ConvergenceCell, ConvergenceTable, CostLedger, MatrixRecord,
    McComparison, McReport, McSource, PdfRecord, ProbeReport, Profile, StageTime, ValidationRow,
    ValidationTable,
};
pub use run::{
    build_dataset, compare_mc, convergence_study, evaluation_set, exact_mc_run, load_surrogate,
    mc_parameters, mean_error, offline_run, online_mc_run, sample_parameters, train_cae_stage,
    train_ffnn_stage, validate_run, OfflineArtifacts, RunOptions, CAE_FILE, DATASET_FILE,
    FFNN_FILE, OFFLINE_LEDGER_FILE,
};
pub use simulator::{ProbeSite, Simulator};
