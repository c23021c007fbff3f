mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use tsfuzz::clustering::{
    cluster, cluster_from_partition, cluster_observed, extended_regressors, init_partition,
};
use tsfuzz::dataio::generate_benchmark;
use tsfuzz::pipeline::identify;
use tsfuzz::{BenchmarkKind, ClusteringConfig, ColumnRoles, Dataset, PipelineConfig};

fn noisy_plane(seed: u64, samples: usize) -> Dataset {
    let mut r = common::rng(seed);
    let x = DMatrix::from_fn(samples, 2, |_, _| r.random_range(-1.0..1.0));
    let y = DVector::from_fn(samples, |k, _| {
        0.3 - x[(k, 0)] + 2.0 * x[(k, 1)] + 0.2 * r.sample::<f64, _>(StandardNormal)
    });
    Dataset::new(x, y, vec!["p".into(), "q".into()]).unwrap()
}

#[test]
fn single_cluster_is_global_least_squares() {
    let data = noisy_plane(5, 60).mean_center().unwrap();
    let cfg = ClusteringConfig { cluster_count: 1, ..Default::default() };
    let roles = ColumnRoles::all(2);
    let result = cluster(&data, &cfg, &roles).unwrap();

    let phi = extended_regressors(data.descriptors(), &roles.consequent);
    let oracle = common::normal_equations_wls(&phi, &vec![1.0; 60], data.activity().as_slice());
    let theta = &result.prototypes[0].theta;
    for (a, b) in theta.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-8, "{theta:?} vs {oracle:?}");
    }
    assert!(result.partition.memberships().iter().all(|&mu| mu == 1.0));
    assert!((result.prototypes[0].prior - 1.0).abs() < 1e-15);
}

#[test]
fn noiseless_two_regime_recovers_both_lines() {
    let (data, truth) = generate_benchmark(BenchmarkKind::TwoRegime, 200, 0.0, 42).unwrap();
    let fit = identify(&data, &PipelineConfig::default()).unwrap();
    let mut found = fit.model.raw_consequents();
    found.sort_by(|a, b| b.gains[0].total_cmp(&a.gains[0]));
    assert_eq!(found.len(), 2);
    for (model, regime) in found.iter().zip(&truth.regimes) {
        assert!((model.gains[0] - regime.gains[0]).abs() < 0.05, "{model:?} vs {regime:?}");
        assert!((model.offset - regime.offset).abs() < 0.05, "{model:?} vs {regime:?}");
    }
}

#[test]
fn repeated_runs_are_identical() {
    let (data, _) = generate_benchmark(BenchmarkKind::SigmoidBlend, 80, 0.05, 9).unwrap();
    let cfg = PipelineConfig::default();
    let a = identify(&data, &cfg).unwrap();
    let b = identify(&data, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.clustering, b.clustering);
}

#[test]
fn objective_ends_below_its_start_on_two_regime_data() {
    let (data, _) = generate_benchmark(BenchmarkKind::TwoRegime, 200, 0.05, 42).unwrap();
    let fit = identify(&data, &PipelineConfig::default()).unwrap();
    let trace = &fit.clustering.objective_trace;
    assert_eq!(trace.len(), fit.clustering.iterations);
    assert!(trace.last().unwrap() < trace.first().unwrap(), "{trace:?}");
    assert!(trace.iter().all(|j| j.is_finite() && *j >= 0.0));
}

#[test]
fn model_predictions_match_in_loop_fuzzy_mean() {
    for (kind, seed) in [(BenchmarkKind::TwoRegime, 1), (BenchmarkKind::SigmoidBlend, 2)] {
        let (data, _) = generate_benchmark(kind, 120, 0.05, seed).unwrap();
        let fit = identify(&data, &PipelineConfig::default()).unwrap();
        let in_loop = fit.clustering.fitted_values(fit.centered.descriptors());
        let in_loop: Vec<f64> = in_loop
            .iter()
            .map(|v| v + fit.model.centering().activity_mean)
            .collect();
        let model: Vec<f64> = fit.model.predict_batch(data.descriptors()).unwrap().iter().copied().collect();
        let observed = data.activity().as_slice();
        let a = tsfuzz::evaluation::rmse(observed, &in_loop).unwrap();
        let b = tsfuzz::evaluation::rmse(observed, &model).unwrap();
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn permuting_samples_permutes_the_partition() {
    let (data, _) = generate_benchmark(BenchmarkKind::IrrelevantDescriptor, 40, 0.05, 4).unwrap();
    let data = data.mean_center().unwrap();
    let cfg = ClusteringConfig { max_iterations: 15, tolerance: 1e-300, ..Default::default() };
    let roles = ColumnRoles::all(2);
    let initial = init_partition(40, 2, 8).unwrap();
    let base = cluster_from_partition(&data, &cfg, &roles, initial.clone()).unwrap();

    let order: Vec<usize> = (0..40).map(|k| (k * 17 + 3) % 40).collect();
    let permuted = data.select_rows(&order).unwrap();
    let moved = cluster_from_partition(&permuted, &cfg, &roles, initial.select_samples(&order)).unwrap();

    let expected = base.partition.select_samples(&order);
    assert!(moved.partition.max_abs_diff(&expected) <= 1e-10);
    for (p, q) in base.prototypes.iter().zip(&moved.prototypes) {
        for (a, b) in p.theta.iter().zip(&q.theta) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn every_iterate_is_a_fuzzy_partition_and_priors_sum_to_one() {
    for seed in 0..10u64 {
        let (data, _) = generate_benchmark(BenchmarkKind::SigmoidBlend, 50, 0.1, seed).unwrap();
        let data = data.mean_center().unwrap();
        let cfg = ClusteringConfig { cluster_count: 2 + (seed as usize % 3), seed, ..Default::default() };
        let roles = ColumnRoles::all(2);
        let initial = init_partition(50, cfg.cluster_count, seed).unwrap();
        let mut seen = 0;
        let result = cluster_observed(&data, &cfg, &roles, initial, |u| {
            u.check_constraints(1e-9).unwrap();
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, result.iterations);
        let total: f64 = result.prototypes.iter().map(|p| p.prior).sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }
}
