use std::path::Path;

use caerom::pipeline::*;
use caerom::stats::ParameterVector;
use caerom::{Error, SolutionMatrix};
use proptest::prelude::*;

/// Coarse Burgers grid with tiny networks and schedules.
const SMOKE: &str = r#"
seed = 5

[problem]
kind = "burgers"

[problem.solver]
n_x = 24
n_t = 16
t_max = 1.0

[sampling]
n = 2
method = "lhs"

[sampling.space]
names = ["nu"]
distributions = [{ kind = "uniform", lo = 0.2, hi = 0.8 }]

[cae.mirrored]
filters = [4, 4]
kernel = 3
latent_dim = 2

[cae.training]
epochs = 3
learning_rate = 1e-3
batch_size = 1

[ffnn]
hidden = [8, 8]

[ffnn.training]
epochs = 5
learning_rate = 1e-3
batch_size = 2

[mc]
n_mc = 8
batch_size = 3

[validation]
thetas = [[0.3], [0.6]]
profile_times = [0.5]
"#;

fn smoke() -> PipelineConfig {
    let cfg = PipelineConfig::from_toml_str(SMOKE).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn shipped(name: &str) -> PipelineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    PipelineConfig::load(&path).unwrap()
}

fn run_in(dir: &Path, cfg: &PipelineConfig) -> OfflineArtifacts {
    let opts = RunOptions {
        threads: 1,
        out_dir: Some(dir.to_path_buf()),
    };
    offline_run(cfg, &opts).unwrap()
}

#[test]
fn shipped_configs_parse_with_expected_shapes() {
    let cfg = shipped("burgers.toml");
    let sim = Simulator::from_config(&cfg).unwrap();
    assert_eq!((cfg.sampling.n, sim.output_shape()), (100, (200, 100)));
    assert_eq!(cfg.cae_architecture(200, 100).unwrap().latent_dim, 8);
    assert_eq!(cfg.ffnn_architecture(8).hidden, vec![32; 4]);

    let cfg = shipped("elasticity.toml");
    let sim = Simulator::from_config(&cfg).unwrap();
    let (d, n_t) = sim.output_shape();
    assert!((150..=300).contains(&d), "{d} DOFs");
    assert_eq!(n_t, 150);
    cfg.validate_shapes(d, n_t).unwrap();
}

#[test]
fn config_errors_are_config_errors() {
    let unknown = SMOKE.replace("seed = 5", "seed = 5\nbogus = 1");
    let e = PipelineConfig::from_toml_str(&unknown).unwrap_err();
    assert!(matches!(e, Error::Config(_)));
    assert_eq!(e.exit_code(), 2);

    let bad_theta = SMOKE.replace("thetas = [[0.3], [0.6]]", "thetas = [[0.3, 1.0]]");
    let cfg = PipelineConfig::from_toml_str(&bad_theta).unwrap();
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));

    let bad_points = SMOKE.replace("batch_size = 3", "batch_size = 3\npoints = [[0.1, 0.2]]");
    let cfg = PipelineConfig::from_toml_str(&bad_points).unwrap();
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));

    let missing = std::env::temp_dir().join("caerom-no-such-config.toml");
    let e = PipelineConfig::load(&missing).unwrap_err();
    assert_eq!(e.exit_code(), 4);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = smoke();
    let back = PipelineConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn smoke_run_persists_loadable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    let art = run_in(dir.path(), &cfg);
    assert_eq!(
        (
            art.dataset.header.n,
            art.dataset.header.d,
            art.dataset.header.n_t
        ),
        (2, 24, 16)
    );

    let ds = SnapshotDataset::load(&dir.path().join(DATASET_FILE)).unwrap();
    assert_eq!(ds.checksum().unwrap(), art.dataset.checksum().unwrap());
    let sur = load_surrogate(&dir.path().join(CAE_FILE), &dir.path().join(FFNN_FILE)).unwrap();
    let theta = ParameterVector::new(vec![0.5]);
    assert_eq!(
        sur.predict(&theta).unwrap().solution,
        art.surrogate.predict(&theta).unwrap().solution
    );
    assert!(dir.path().join(OFFLINE_LEDGER_FILE).exists());

    let names: Vec<&str> = art.ledger.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(
        names,
        ["setup", "sample", "solve", "train-cae", "train-ffnn"]
    );
    let sum: f64 = art.ledger.stages.iter().map(|s| s.seconds).sum();
    assert!((art.ledger.total() - sum).abs() <= 1e-9);
}

#[test]
fn same_seed_reproduces_artifacts() {
    let cfg = smoke();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_in(a.path(), &cfg);
    let rb = run_in(b.path(), &cfg);
    assert_eq!(
        ra.dataset.checksum().unwrap(),
        rb.dataset.checksum().unwrap()
    );
    for f in [DATASET_FILE, CAE_FILE, FFNN_FILE] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }

    let other = PipelineConfig { seed: 6, ..cfg };
    let c = tempfile::tempdir().unwrap();
    let rc = run_in(c.path(), &other);
    assert_ne!(
        ra.dataset.checksum().unwrap(),
        rc.dataset.checksum().unwrap()
    );
}

#[test]
fn stage_failure_names_the_stage_and_keeps_earlier_artifacts() {
    let text = SMOKE.replace(
        "learning_rate = 1e-3\nbatch_size = 2",
        "learning_rate = 1e30\nbatch_size = 2",
    );
    let text = text.replace("epochs = 5", "epochs = 200");
    let cfg = PipelineConfig::from_toml_str(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        threads: 1,
        out_dir: Some(dir.path().to_path_buf()),
    };
    match offline_run(&cfg, &opts) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "train-ffnn");
            assert_eq!(source.exit_code(), 3);
        }
        other => panic!("expected a stage failure, got {:?}", other.map(|_| ())),
    }
    assert!(dir.path().join(DATASET_FILE).exists());
    assert!(dir.path().join(CAE_FILE).exists());
    assert!(!dir.path().join(FFNN_FILE).exists());
}

#[test]
fn dataset_checksum_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let art = run_in(dir.path(), &smoke());
    let bytes = art.dataset.to_bytes().unwrap();
    let back = SnapshotDataset::from_bytes(&bytes).unwrap();
    assert_eq!(back.params, art.dataset.params);
    assert_eq!(back.solutions, art.dataset.solutions);

    let mut damaged = bytes.clone();
    let k = damaged.len() - 20;
    damaged[k] ^= 0x01;
    assert!(matches!(
        SnapshotDataset::from_bytes(&damaged),
        Err(Error::Format(_))
    ));
    assert!(matches!(
        SnapshotDataset::from_bytes(&bytes[..bytes.len() / 2]),
        Err(Error::Format(_))
    ));
}

#[test]
fn identical_draws_give_zero_variance() {
    let text = SMOKE.replace("batch_size = 3", "batch_size = 3\npoints = [[0.4], [0.4]]");
    let cfg = PipelineConfig::from_toml_str(&text).unwrap();
    cfg.validate().unwrap();
    let sim = Simulator::from_config(&cfg).unwrap();
    let report = exact_mc_run(&cfg, &sim, &RunOptions::default()).unwrap();
    assert_eq!(report.n_mc, 2);
    assert!(report
        .variance_matrix()
        .unwrap()
        .values()
        .iter()
        .all(|&v| v == 0.0));
    assert_eq!(
        report.mean_matrix().unwrap().values(),
        sim.solve(&ParameterVector::new(vec![0.4]))
            .unwrap()
            .values()
    );

    let dir = tempfile::tempdir().unwrap();
    report_emit(&report, None, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("variance.csv")).unwrap();
    assert!(text
        .split([',', '\n'])
        .filter(|s| !s.is_empty())
        .all(|s| s.parse::<f64>().unwrap() == 0.0));

    let single = SMOKE.replace("batch_size = 3", "batch_size = 3\npoints = [[0.4]]");
    let cfg = PipelineConfig::from_toml_str(&single).unwrap();
    assert!(matches!(
        exact_mc_run(&cfg, &sim, &RunOptions::default()),
        Err(Error::Stage { .. })
    ));
}

#[test]
fn surrogate_and_exact_mc_share_draws_and_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    let art = run_in(dir.path(), &cfg);
    let sim = Simulator::from_config(&cfg).unwrap();
    let online = online_mc_run(&cfg, &sim, &art.surrogate).unwrap();
    let exact = exact_mc_run(&cfg, &sim, &RunOptions::default()).unwrap();
    assert_eq!(online.n_mc, 8);
    assert_eq!(online.seed, exact.seed);
    assert_eq!(online.probes.len(), 2);
    assert!(matches!(
        online.probes[0].pdf,
        PdfRecord::Unavailable { .. }
    ));
    let c = compare_mc(&online, &exact).unwrap();
    assert!(c.mean_error.is_finite() && c.variance_error.is_finite());

    let out = dir.path().join("mc");
    report_emit(&online, Some(&art.ledger), &out).unwrap();
    let back = McReport::load(&out.join("summary.json")).unwrap();
    assert_eq!(back, online);
    for f in ["pdf_0.csv", "pdf_1.csv", "histories.csv", "ledger.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let mean = std::fs::read_to_string(out.join("mean.csv")).unwrap();
    let rows: Vec<&str> = mean.lines().collect();
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().all(|r| r.split(',').count() == 16));
}

#[test]
fn validation_reports_each_theta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    let art = run_in(dir.path(), &cfg);
    let sim = Simulator::from_config(&cfg).unwrap();

    let empty = validate_run(&cfg, &sim, &art.surrogate, &[]);
    assert!(empty.rows.is_empty());
    empty.write(&dir.path().join("empty")).unwrap();

    let thetas = [
        ParameterVector::new(vec![0.3]),
        ParameterVector::new(vec![0.3, 0.1]),
    ];
    let table = validate_run(&cfg, &sim, &art.surrogate, &thetas);
    assert_eq!(table.rows.len(), 2);
    let exact = sim.solve(&thetas[0]).unwrap();
    let pred = art.surrogate.predict(&thetas[0]).unwrap().solution;
    let direct = caerom::stats::normalized_error(&exact, &pred).unwrap();
    assert_eq!(table.rows[0].error, Some(direct));
    assert_eq!(table.rows[0].profiles.len(), 1);
    assert!(table.rows[1].error.is_none() && table.rows[1].failure.is_some());
    table.write(&dir.path().join("validation")).unwrap();
    assert!(dir.path().join("validation/validation.csv").exists());
}

#[test]
fn training_point_error_is_bounded_by_reconstruction_plus_ffnn_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    let art = run_in(dir.path(), &cfg);
    let sim = Simulator::from_config(&cfg).unwrap();
    let sur = &art.surrogate;
    let theta = art.dataset.params[0].clone();
    let exact = sim.solve(&theta).unwrap();
    let total =
        caerom::stats::normalized_error(&exact, &sur.predict(&theta).unwrap().solution).unwrap();
    let recon = sur.cae.reconstruct(&exact).unwrap();
    let e_rec = caerom::stats::normalized_error(&exact, &recon).unwrap();
    let via_code = sur
        .cae
        .decode(&sur.ffnn.predict_latent(&theta).unwrap())
        .unwrap();
    let residual = frobenius_diff(&recon, &via_code) / frobenius(&exact);
    assert!(
        total <= e_rec + residual + 1e-9,
        "{total} > {e_rec} + {residual}"
    );
}

fn frobenius(u: &SolutionMatrix) -> f64 {
    u.values().iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn frobenius_diff(a: &SolutionMatrix, b: &SolutionMatrix) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn single_cell_convergence_matches_direct_evaluation() {
    let mut cfg = smoke();
    cfg.convergence.eval_samples = 4;
    let table = convergence_study(&cfg, &[2], &[2], &RunOptions::default()).unwrap();
    assert_eq!(table.cells.len(), 1);

    let dir = tempfile::tempdir().unwrap();
    let art = run_in(dir.path(), &cfg);
    let sim = Simulator::from_config(&cfg).unwrap();
    let (thetas, exact) = evaluation_set(&cfg, &sim, 4, 1).unwrap();
    let direct = mean_error(&art.surrogate, &thetas, &exact).unwrap();
    assert_eq!(table.get(2, 2), Some(direct));

    let path = dir.path().join("convergence.csv");
    table.write_csv(&path).unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap().lines().count(), 2);
}

#[test]
fn convergence_cell_failures_are_recorded() {
    let cfg = smoke();
    let table = convergence_study(&cfg, &[2, 3], &[1, 2], &RunOptions::default()).unwrap();
    assert_eq!(table.cells.len(), 4);
    assert!(table.cells.iter().any(|c| c.failure.is_none()));
    assert!(convergence_study(&cfg, &[], &[2], &RunOptions::default()).is_err());
}

#[test]
fn burgers_default_probes_sit_at_the_reference_points() {
    let cfg = shipped("burgers.toml");
    let sim = Simulator::from_config(&cfg).unwrap();
    let sites: Vec<ProbeSite> = sim
        .default_probes()
        .iter()
        .map(|p| sim.locate(p).unwrap())
        .collect();
    assert_eq!(sites.len(), 2);
    let time = sim.time_axis();
    for s in &sites {
        assert!((time[s.step] - 2.4747).abs() < 0.03);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn stage_seeds_are_distinct(seed in any::<u64>()) {
        let cfg = PipelineConfig { seed, ..smoke() };
        let s = [
            cfg.stage_seed(Stage::Sampling),
            cfg.stage_seed(Stage::Training),
            cfg.stage_seed(Stage::MonteCarlo),
            cfg.stage_seed(Stage::Evaluation),
        ];
        for i in 0..4 {
            for j in i + 1..4 {
                prop_assert_ne!(s[i], s[j]);
            }
        }
    }
}
