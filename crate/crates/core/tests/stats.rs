mod common;

use caerom::stats::*;
use caerom::SolutionMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_matrix(rng: &mut impl Rng, d: usize, t: usize, offset: f64) -> SolutionMatrix {
    let v = (0..d * t)
        .map(|_| offset + rng.random_range(-1.0..1.0))
        .collect();
    SolutionMatrix::new(d, t, v).unwrap()
}

fn two_pass(samples: &[SolutionMatrix]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let len = samples[0].values().len();
    let mut mean = vec![0.0; len];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.values()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for s in samples {
        for ((v, x), m) in var.iter_mut().zip(s.values()).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= n - 1.0);
    (mean, var)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn assert_stratified(points: &[ParameterVector], ranges: &[(f64, f64)]) {
    let n = points.len();
    for (j, &(lo, hi)) in ranges.iter().enumerate() {
        let mut hits = vec![0usize; n];
        for p in points {
            let u = (p.values[j] - lo) / (hi - lo);
            let k = ((u * n as f64).floor() as usize).min(n - 1);
            hits[k] += 1;
        }
        assert!(hits.iter().all(|&h| h == 1), "dim {j}: {hits:?}");
    }
}

#[test]
fn lhs_deciles_for_ten_points_in_three_dims() {
    let ranges = [(0.0, 1.0), (-3.0, 5.0), (1e9, 2e9)];
    let p = lhs_sample(10, &ranges, 42).unwrap();
    for (j, &(lo, hi)) in ranges.iter().enumerate() {
        let mut col: Vec<f64> = p.iter().map(|v| v.values[j]).collect();
        col.sort_by(f64::total_cmp);
        for (k, x) in col.iter().enumerate() {
            let decile = ((x - lo) / (hi - lo) * 10.0).floor() as usize;
            assert_eq!(decile, k);
        }
    }
}

#[test]
fn lhs_is_deterministic() {
    let r = [(0.0, 1.0), (0.0, 1.0)];
    assert_eq!(
        lhs_sample(25, &r, 9).unwrap(),
        lhs_sample(25, &r, 9).unwrap()
    );
    assert_ne!(
        lhs_sample(25, &r, 9).unwrap(),
        lhs_sample(25, &r, 10).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn lhs_marginals_are_stratified(
        n in prop::sample::select(vec![1usize, 10, 100]),
        dim in 1usize..=5,
        seed in any::<u64>(),
    ) {
        let ranges: Vec<(f64, f64)> = (0..dim).map(|j| (j as f64, 2.0 * j as f64 + 1.0)).collect();
        let p = lhs_sample(n, &ranges, seed).unwrap();
        prop_assert_eq!(p.len(), n);
        assert_stratified(&p, &ranges);
    }

    #[test]
    fn lognormal_lhs_is_stratified_in_probability(seed in any::<u64>()) {
        let space = ParameterSpace {
            names: vec!["e".into()],
            distributions: vec![Distribution::LogNormal { mean: 30e9, sd: 7.5e9 }],
        };
        let p = space.lhs(20, seed).unwrap();
        let (mu, sigma) = lognormal_params(30e9, 7.5e9);
        let ln = statrs::distribution::LogNormal::new(mu, sigma).unwrap();
        use statrs::distribution::ContinuousCDF;
        let mut hits = [0; 20];
        for v in &p {
            hits[((ln.cdf(v.values[0]) * 20.0).floor() as usize).min(19)] += 1;
        }
        prop_assert!(hits.iter().all(|&h| h == 1));
    }

    #[test]
    fn error_is_scale_invariant(c in 1e-3f64..1e3, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let a = random_matrix(&mut rng, 4, 6, 0.5);
        let b = random_matrix(&mut rng, 4, 6, 0.5);
        let e1 = normalized_error(&a, &b).unwrap();
        let e2 = normalized_error(&a.scaled(c), &b.scaled(c)).unwrap();
        prop_assert!(rel(e1, e2) < 1e-12);
    }

    #[test]
    fn error_is_invariant_to_row_permutation(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (d, t) = (7, 5);
        let a = random_matrix(&mut rng, d, t, 0.0);
        let b = random_matrix(&mut rng, d, t, 0.0);
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut rng);
        let permute = |m: &SolutionMatrix| {
            let v = perm.iter().flat_map(|&r| m.row(r).to_vec()).collect();
            SolutionMatrix::new(d, t, v).unwrap()
        };
        let e1 = normalized_error(&a, &b).unwrap();
        let e2 = normalized_error(&permute(&a), &permute(&b)).unwrap();
        prop_assert!(rel(e1, e2) < 1e-14);
    }
}

#[test]
fn lognormal_sample_mean_within_half_percent() {
    let s = sample_lognormal(30e9, 7.5e9, 1_000_000, 2024).unwrap();
    assert!(s.iter().all(|&x| x > 0.0));
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    assert!(rel(mean, 30e9) <= 5e-3, "mean {mean:e}");
}

#[test]
fn streaming_moments_match_two_pass() {
    let mut rng = common::rng(11);
    for trial in 0..10 {
        let n = 2 + trial * 7;
        let samples: Vec<SolutionMatrix> =
            (0..n).map(|_| random_matrix(&mut rng, 5, 8, 0.5)).collect();
        let (mean, var) = mc_statistics(samples.clone()).unwrap();
        let (m2, v2) = two_pass(&samples);
        for (a, b) in mean.values().iter().zip(&m2) {
            assert!(rel(*a, *b) <= 1e-12);
        }
        for (a, b) in var.values().iter().zip(&v2) {
            assert!(rel(*a, *b) <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn merged_chunks_match_sequential() {
    let mut rng = common::rng(3);
    let samples: Vec<SolutionMatrix> = (0..37)
        .map(|_| random_matrix(&mut rng, 3, 4, -2.0))
        .collect();
    let mut whole = MomentAccumulator::new(3, 4);
    samples.iter().for_each(|s| whole.push(s).unwrap());
    let mut merged = MomentAccumulator::new(3, 4);
    for chunk in samples.chunks(10) {
        let mut part = MomentAccumulator::new(3, 4);
        chunk.iter().for_each(|s| part.push(s).unwrap());
        merged.merge(&part).unwrap();
    }
    assert_eq!(merged.count(), 37);
    let (a, b) = (whole.variance().unwrap(), merged.variance().unwrap());
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!(rel(*x, *y) < 1e-12);
    }
}

#[test]
fn variance_estimator_is_unbiased() {
    // 400 repetitions of n=5 draws from U(-1,1): true variance 1/3.
    let mut rng = common::rng(77);
    let reps = 400;
    let mut estimates = Vec::with_capacity(reps);
    let mut means = Vec::with_capacity(reps);
    for _ in 0..reps {
        let samples: Vec<SolutionMatrix> =
            (0..5).map(|_| random_matrix(&mut rng, 1, 1, 0.0)).collect();
        let (m, v) = mc_statistics(samples).unwrap();
        means.push(m.values()[0]);
        estimates.push(v.values()[0]);
    }
    let check = |xs: &[f64], truth: f64| {
        let n = xs.len() as f64;
        let avg = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(
            (avg - truth).abs() <= 3.0 * sd / n.sqrt(),
            "{avg} vs {truth}"
        );
    };
    check(&estimates, 1.0 / 3.0);
    check(&means, 0.0);
}

#[test]
fn average_error_matches_loop() {
    let mut rng = common::rng(5);
    let refs: Vec<_> = (0..9).map(|_| random_matrix(&mut rng, 3, 3, 2.0)).collect();
    let surs: Vec<_> = (0..9).map(|_| random_matrix(&mut rng, 3, 3, 2.0)).collect();
    let mut total = 0.0;
    for (r, s) in refs.iter().zip(&surs) {
        total += normalized_error(r, s).unwrap();
    }
    assert_eq!(average_normalized_error(&refs, &surs).unwrap(), total / 9.0);
    assert_eq!(average_normalized_error(&refs, &refs).unwrap(), 0.0);
}

#[test]
fn kde_recovers_standard_normal() {
    let mut rng = common::rng(1);
    let normal = rand_distr::StandardNormal;
    let samples: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(normal)).collect();
    let grid: Vec<f64> = (0..161).map(|i| -4.0 + i as f64 * 0.05).collect();
    let PdfEstimate::Curve { density, .. } = pdf_estimate(&samples, &grid).unwrap() else {
        panic!("expected a curve");
    };
    let max_dev = grid
        .iter()
        .zip(&density)
        .map(|(x, d)| (d - (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs())
        .fold(0.0, f64::max);
    assert!(max_dev <= 0.02, "max deviation {max_dev}");
    assert!(density.iter().all(|&d| d >= 0.0));
}
