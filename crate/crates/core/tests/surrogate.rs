use caerom::stats::{normalized_error, ParameterVector};
use caerom::surrogate::*;
use caerom::tensor::Activation;
use caerom::{Error, SolutionMatrix};
use proptest::prelude::*;

/// Smooth travelling pulse on a `d × t` grid, shifted by `shift`.
fn pulse(d: usize, t: usize, shift: f64) -> SolutionMatrix {
    let mut values = Vec::with_capacity(d * t);
    for i in 0..d {
        for k in 0..t {
            let x = i as f64 / d as f64 - 0.3 - shift * k as f64 / t as f64;
            values.push((-40.0 * x * x).exp() + 0.1 * shift);
        }
    }
    SolutionMatrix::new(d, t, values).unwrap()
}

fn small_arch(latent: usize) -> CaeArchitecture {
    CaeArchitecture::mirrored(4, 16, [6, 4], 3, Some(2), latent).unwrap()
}

fn linear_arch() -> CaeArchitecture {
    let conv = |f| LayerSpec::Conv1d {
        filters: f,
        kernel: 3,
        stride: 2,
        padding: 1,
        activation: Activation::Linear,
    };
    let deconv = |f| LayerSpec::Deconv1d {
        filters: f,
        kernel: 3,
        stride: 2,
        crop: None,
        activation: Activation::Linear,
    };
    CaeArchitecture {
        channels: 3,
        length: 12,
        latent_dim: 4,
        encoder: vec![
            conv(5),
            LayerSpec::Flatten,
            LayerSpec::Dense {
                units: 4,
                activation: Activation::Linear,
            },
        ],
        decoder: vec![
            LayerSpec::Dense {
                units: 30,
                activation: Activation::Linear,
            },
            LayerSpec::Reshape {
                channels: 5,
                length: 6,
            },
            deconv(3),
        ],
    }
}

fn training_set(n: usize) -> (Vec<ParameterVector>, Vec<SolutionMatrix>) {
    let thetas: Vec<_> = (0..n)
        .map(|i| ParameterVector::new(vec![i as f64 / (n - 1) as f64]))
        .collect();
    let sols = thetas.iter().map(|p| pulse(4, 16, p.values[0])).collect();
    (thetas, sols)
}

#[test]
fn burgers_defaults_have_stated_shapes() {
    let arch = CaeArchitecture::burgers_default();
    let cae = Cae::new(&arch, Normalization::IDENTITY, 0).unwrap();
    let z = cae.encode(&SolutionMatrix::zeros(200, 100)).unwrap();
    assert_eq!(z.len(), 8);
    assert_eq!(cae.decode(&z).unwrap().shape(), (200, 100));
    assert_eq!(
        FfnnArchitecture::burgers_default().widths(),
        vec![1, 32, 32, 32, 32, 8]
    );
    let f = FfnnArchitecture::burgers_default();
    assert_eq!(f.hidden_activation, Activation::Relu);
    let last = f.layers().pop().unwrap();
    assert_eq!(
        last,
        LayerSpec::Dense {
            units: 8,
            activation: Activation::Linear
        }
    );
}

#[test]
fn encoding_is_deterministic() {
    let cae = Cae::new(&small_arch(3), Normalization::IDENTITY, 5).unwrap();
    let u = pulse(4, 16, 0.2);
    assert_eq!(cae.encode(&u).unwrap(), cae.encode(&u.clone()).unwrap());
}

#[test]
fn wrong_input_shape_is_dimension_error() {
    let cae = Cae::new(&small_arch(3), Normalization::IDENTITY, 5).unwrap();
    assert!(matches!(
        cae.encode(&pulse(4, 15, 0.0)),
        Err(Error::Dimension { .. })
    ));
    assert!(matches!(
        cae.decode(&[0.0; 2]),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn all_linear_encoder_is_affine() {
    let norm = Normalization {
        scale: 0.7,
        offset: -0.2,
    };
    let cae = Cae::new(&linear_arch(), norm, 3).unwrap();
    let (u1, u2) = (pulse(3, 12, 0.1), pulse(3, 12, 0.9));
    let a = 0.3;
    let mix = SolutionMatrix::new(
        3,
        12,
        u1.values()
            .iter()
            .zip(u2.values())
            .map(|(x, y)| a * x + (1.0 - a) * y)
            .collect(),
    )
    .unwrap();
    let (z1, z2, zm) = (
        cae.encode(&u1).unwrap(),
        cae.encode(&u2).unwrap(),
        cae.encode(&mix).unwrap(),
    );
    for j in 0..4 {
        let expect = a as f32 * z1[j] + (1.0 - a as f32) * z2[j];
        assert!(
            (zm[j] - expect).abs() < 1e-5 * (1.0 + expect.abs()),
            "{j}: {} vs {expect}",
            zm[j]
        );
    }
}

#[test]
fn zero_code_of_fresh_linear_model_decodes_to_zero() {
    let cae = Cae::new(&linear_arch(), Normalization::IDENTITY, 9).unwrap();
    let y = cae.decode_normalized(&[vec![0.0; 4]]).unwrap();
    assert_eq!(y.shape(), &[1, 3, 12]);
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn single_sample_is_memorized() {
    let u = pulse(4, 16, 0.4);
    let arch = CaeArchitecture::mirrored(4, 16, [16, 16], 3, None, 2).unwrap();
    let (cae, report) = train_cae(
        std::slice::from_ref(&u),
        &arch,
        &TrainConfig::new(1500, 1e-3, 1, 11),
    )
    .unwrap();
    let err = normalized_error(&u, &cae.reconstruct(&u).unwrap()).unwrap();
    assert!(err <= 1e-2, "reconstruction error {err}");
    assert_eq!(report.loss_history.len(), 1500);
}

#[test]
fn loss_decreases_and_beats_constant_predictor() {
    let (_, sols) = training_set(12);
    let (cae, report) =
        train_cae(&sols, &small_arch(2), &TrainConfig::new(300, 1e-3, 5, 2)).unwrap();
    let first = report.loss_history[0];
    let last = report.final_loss().unwrap();
    assert!(last <= first);
    // Loss of predicting the normalized ensemble mean for every sample.
    let n = cae.normalization;
    let size = 64;
    let mean: Vec<f64> = (0..size)
        .map(|j| sols.iter().map(|u| n.apply(u.values()[j])).sum::<f64>() / sols.len() as f64)
        .collect();
    let constant = sols
        .iter()
        .map(|u| {
            u.values()
                .iter()
                .zip(&mean)
                .map(|(v, m)| (n.apply(*v) - m).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / sols.len() as f64;
    assert!(last < constant, "trained {last} vs constant {constant}");
}

#[test]
fn training_is_bit_deterministic() {
    let (_, sols) = training_set(6);
    let cfg = TrainConfig::new(20, 1e-3, 4, 77);
    let run = || {
        let (cae, report) = train_cae(&sols, &small_arch(2), &cfg).unwrap();
        ModelCheckpoint::from_cae(&cae, TrainingMetadata::from_report(cfg.seed, &report))
            .to_bytes()
            .unwrap()
    };
    assert_eq!(run(), run());
    let other = {
        let cfg = TrainConfig {
            seed: 78,
            ..cfg.clone()
        };
        let (cae, _) = train_cae(&sols, &small_arch(2), &cfg).unwrap();
        ModelCheckpoint::from_cae(&cae, TrainingMetadata::default()).tensors
    };
    let (cae, _) = train_cae(&sols, &small_arch(2), &cfg).unwrap();
    assert_ne!(
        ModelCheckpoint::from_cae(&cae, TrainingMetadata::default()).tensors,
        other
    );
}

#[test]
fn divergence_reports_epoch_and_norms() {
    let (_, sols) = training_set(4);
    let err = train_cae(&sols, &small_arch(2), &TrainConfig::new(50, 1e30, 2, 0)).unwrap_err();
    match err {
        Error::Training { detail, .. } => assert!(detail.contains("parameter norms")),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn invalid_schedule_is_config_error() {
    let (_, sols) = training_set(4);
    for cfg in [
        TrainConfig::new(0, 1e-3, 2, 0),
        TrainConfig::new(5, 1e-3, 5, 0),
        TrainConfig::new(5, 0.0, 2, 0),
    ] {
        assert!(matches!(
            train_cae(&sols, &small_arch(2), &cfg),
            Err(Error::Config(_))
        ));
    }
}

#[test]
fn ffnn_fits_constant_targets() {
    let thetas: Vec<_> = (0..10)
        .map(|i| ParameterVector::new(vec![i as f64, -(i as f64)]))
        .collect();
    let z = vec![vec![0.5f32, -1.25, 2.0]; 10];
    let arch = FfnnArchitecture::new(2, vec![16, 16], 3);
    let (_, report) = train_ffnn(&thetas, &z, &arch, &TrainConfig::new(2000, 1e-2, 5, 1)).unwrap();
    assert!(
        report.final_loss().unwrap() < 1e-6,
        "{:?}",
        report.final_loss()
    );
}

#[test]
fn ffnn_learns_linear_map() {
    let thetas: Vec<_> = (0..40)
        .map(|i| ParameterVector::new(vec![(i % 8) as f64 * 0.25, (i / 8) as f64 * 2.0 + 1.0]))
        .collect();
    let z: Vec<Vec<f32>> = thetas
        .iter()
        .map(|t| {
            let (a, b) = (t.values[0], t.values[1]);
            vec![(0.5 * a - 0.1 * b + 0.3) as f32, (-a + 0.2 * b) as f32]
        })
        .collect();
    let mut arch = FfnnArchitecture::new(2, vec![16], 2);
    arch.hidden_activation = Activation::Linear;
    let (ffnn, _) = train_ffnn(&thetas, &z, &arch, &TrainConfig::new(1500, 1e-2, 8, 3)).unwrap();
    let pred = ffnn.predict_latent_batch(&thetas).unwrap();
    let mse = pred
        .iter()
        .zip(&z)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| ((a - b) as f64).powi(2)))
        .sum::<f64>()
        / (2.0 * thetas.len() as f64);
    assert!(mse <= 1e-3, "mse {mse}");
}

fn trained_surrogate() -> (
    Surrogate,
    Vec<ParameterVector>,
    Vec<SolutionMatrix>,
    ModelCheckpoint,
    ModelCheckpoint,
) {
    let (thetas, sols) = training_set(10);
    let cfg = TrainConfig::new(200, 1e-3, 4, 5);
    let (cae, rc) = train_cae(&sols, &small_arch(2), &cfg).unwrap();
    let z = cae.encode_batch(&sols).unwrap();
    let (ffnn, rf) =
        train_ffnn(&thetas, &z, &FfnnArchitecture::new(1, vec![8, 8], 2), &cfg).unwrap();
    let cc = ModelCheckpoint::from_cae(&cae, TrainingMetadata::from_report(5, &rc));
    let fc = ModelCheckpoint::from_ffnn(&ffnn, TrainingMetadata::from_report(5, &rf));
    (Surrogate::new(cae, ffnn).unwrap(), thetas, sols, cc, fc)
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let (sur, thetas, _, cc, fc) = trained_surrogate();
    let dir = tempfile::tempdir().unwrap();
    let (pc, pf) = (dir.path().join("cae.ckpt"), dir.path().join("ffnn.ckpt"));
    cc.save(&pc).unwrap();
    fc.save(&pf).unwrap();
    let (lc, lf) = (
        ModelCheckpoint::load(&pc).unwrap(),
        ModelCheckpoint::load(&pf).unwrap(),
    );
    assert_eq!(lc, cc);
    assert_eq!(lc.metadata.epochs, 200);
    assert!(lc.metadata.final_loss.unwrap().is_finite());
    let loaded = Surrogate::new(lc.to_cae().unwrap(), lf.to_ffnn().unwrap()).unwrap();
    for (a, b) in sur
        .predict_batch(&thetas)
        .unwrap()
        .iter()
        .zip(loaded.predict_batch(&thetas).unwrap())
    {
        assert_eq!(a.solution.values(), b.solution.values());
    }
}

#[test]
fn damaged_or_mismatched_checkpoints_are_rejected() {
    let (_, _, _, cc, fc) = trained_surrogate();
    let bytes = cc.to_bytes().unwrap();
    assert!(matches!(
        ModelCheckpoint::from_bytes(&bytes[..bytes.len() - 3]),
        Err(Error::Format(_))
    ));
    assert!(matches!(
        ModelCheckpoint::from_bytes(b"garbage!"),
        Err(Error::Format(_))
    ));
    assert!(matches!(cc.to_ffnn(), Err(Error::Compatibility(_))));
    assert!(matches!(fc.to_cae(), Err(Error::Compatibility(_))));
    let other = Cae::new(&small_arch(3), Normalization::IDENTITY, 0).unwrap();
    assert!(matches!(
        Surrogate::new(other, fc.to_ffnn().unwrap()),
        Err(Error::Compatibility(_))
    ));
    let missing = ModelCheckpoint::load(std::path::Path::new("/nonexistent/x.ckpt")).unwrap_err();
    assert_eq!(missing.exit_code(), 4);
}

#[test]
fn out_of_range_parameters_are_flagged_not_rejected() {
    let (sur, _, _, _, _) = trained_surrogate();
    let inside = sur.predict(&ParameterVector::new(vec![0.5])).unwrap();
    let outside = sur.predict(&ParameterVector::new(vec![1.5])).unwrap();
    assert!(!inside.out_of_range);
    assert!(outside.out_of_range);
    assert_eq!(outside.solution.shape(), (4, 16));
    assert!(sur.predict(&ParameterVector::new(vec![0.5, 0.1])).is_err());
}

#[test]
fn prediction_error_obeys_triangle_bound() {
    let (sur, thetas, sols, _, _) = trained_surrogate();
    for (theta, u) in thetas.iter().zip(&sols) {
        let pred = sur.predict(theta).unwrap().solution;
        let recon = sur.cae.reconstruct(u).unwrap();
        let err = normalized_error(u, &pred).unwrap();
        // ||pred − u|| ≤ ||recon − u|| + ||pred − recon||
        let gap: f64 = pred
            .values()
            .iter()
            .zip(recon.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let bound = normalized_error(u, &recon).unwrap() + gap.sqrt() / u.frobenius_norm();
        assert!(err <= bound * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn decode_encode_preserves_shape(
        channels in 1usize..6,
        length in 6usize..40,
        f1 in 1usize..5,
        f2 in 1usize..5,
        kernel in prop::sample::select(vec![3usize, 5]),
        latent in 1usize..4,
        pool in prop::option::of(2usize..4),
        seed in 0u64..100,
    ) {
        let arch = match CaeArchitecture::mirrored(channels, length, [f1, f2], kernel, pool, latent) {
            Ok(a) => a,
            Err(_) => return Ok(()),
        };
        let cae = Cae::new(&arch, Normalization::IDENTITY, seed).unwrap();
        let u = pulse(channels, length, 0.3);
        prop_assert_eq!(cae.reconstruct(&u).unwrap().shape(), u.shape());
    }
}
