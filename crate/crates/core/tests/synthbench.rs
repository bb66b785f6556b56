use nalgebra::{DMatrix, DVector};

use rlgp::estimator::loss;
use rlgp::kernel::CovarianceState;
use rlgp::neighborhood::Dataset;
use rlgp::synthbench::{
    bench_dataset, boundary_scenarios, lhs_design, partition_covariance, sample_partitioned_gp, BenchConfig,
    PartitionSpec,
};

#[test]
fn lhs_hundred_by_three_is_stratified() {
    let x = lhs_design(100, 3, 42);
    for c in 0..3 {
        let mut counts = [0usize; 100];
        for i in 0..100 {
            counts[(((x[(i, c)] + 0.5) * 100.0).floor() as usize).min(99)] += 1;
        }
        assert!(counts.iter().all(|&k| k == 1));
    }
}

#[test]
fn region_means_differ_by_eleven() {
    let spec = PartitionSpec::random(2, 8);
    let s = sample_partitioned_gp(&spec, 300, 50, 8).unwrap();
    let (mut a, mut na, mut b, mut nb) = (0.0, 0, 0.0, 0);
    for i in 0..s.train.len() {
        if spec.in_region1(&s.train.row(i)) {
            a += s.train.y()[i];
            na += 1;
        } else {
            b += s.train.y()[i];
            nb += 1;
        }
    }
    let gap = b / nb as f64 - a / na as f64;
    assert!((gap - 11.0).abs() < 1.5, "gap {gap}");
}

#[test]
fn training_noise_has_variance_three() {
    let spec = PartitionSpec::random(2, 2);
    let s = sample_partitioned_gp(&spec, 600, 5, 2).unwrap();
    let resid: Vec<f64> = s.train.y().iter().zip(&s.train_truth).map(|(y, t)| y - t).collect();
    let m = resid.iter().sum::<f64>() / resid.len() as f64;
    let v = resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / resid.len() as f64;
    assert!((v - 3.0).abs() < 0.5, "noise variance {v}");
}

#[test]
fn generating_covariance_is_the_stated_kernel() {
    let spec = PartitionSpec::random(4, 1);
    let sites = lhs_design(12, 4, 1);
    let k = partition_covariance(&spec, &sites).unwrap();
    for i in 0..12 {
        for j in 0..12 {
            let dsq: f64 = (0..4).map(|c| (sites[(i, c)] - sites[(j, c)]).powi(2)).sum();
            assert!((k[(i, j)] - 7.0 * (-0.4 * dsq).exp()).abs() < 1e-13);
        }
    }
}

#[test]
fn scenarios_are_reproducible() {
    let a = boundary_scenarios(11);
    let b = boundary_scenarios(11);
    for (s, t) in a.iter().zip(&b) {
        assert_eq!(s.train, t.train);
        assert_eq!(s.query, t.query);
    }
}

#[test]
fn median_baseline_is_exact_on_a_constant_surface() {
    let x = lhs_design(30, 2, 6);
    let train = Dataset::new(x, DVector::from_element(30, 4.0)).unwrap();
    let queries: Vec<Vec<f64>> = (0..5).map(|i| vec![0.1 * i as f64 - 0.2, 0.05]).collect();
    let cfg = BenchConfig::parse("methods = median, localgp\nneighbors = 10").unwrap();
    let rows = bench_dataset(&cfg, "flat", &train, &queries, &[4.0; 5]).unwrap();
    assert_eq!(rows[0].method, "median");
    assert_eq!(rows[0].mse, 0.0);
    assert_eq!(rows[0].n_failed, 0);
    assert!(rows[1].mse < 1e-12);
}

#[test]
fn perspective_bound_is_approached() {
    // S = (‖r‖/√c0) P + β (I − P), P = r rᵀ/‖r‖², gives √c0‖r‖ + ½c0β(n−1)
    let r = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let c0: f64 = 0.7;
    let norm = r.norm();
    let p = &r * r.transpose() / (norm * norm);
    let beta = 1e-6;
    let s = &p * (norm / c0.sqrt()) + (DMatrix::identity(3, 3) - &p) * beta;
    let cov = CovarianceState::from_sigma(&s * &s).unwrap();
    let l = loss(0.0, &DVector::zeros(3), &cov, &r, c0).unwrap();
    let bound = c0.sqrt() * norm;
    assert!(l >= bound * (1.0 - 1e-12));
    assert!(l - bound < 1e-5, "loss {l} vs infimum {bound}");
}
