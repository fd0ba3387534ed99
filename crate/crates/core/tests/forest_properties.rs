use proptest::prelude::*;
use weakpu::data::FeatureMatrix;
use weakpu::eval::roc_auc;
use weakpu::iforest::{
    anomaly_score, avg_path_norm, fit_forest, path_length, score_batch, ForestConfig, Node,
};
use weakpu::synth::{gen_planted_anomalies, PlantedAnomalySpec};

fn config(n_estimators: usize, subsample_size: usize, seed: u64) -> ForestConfig {
    ForestConfig {
        n_estimators,
        subsample_size,
        seed,
        ..ForestConfig::default()
    }
}

fn check_splits(node: &Node, x: &FeatureMatrix, rows: &[usize], depth: usize, max_depth: usize) -> usize {
    assert!(depth <= max_depth);
    match node {
        Node::Leaf { size } => {
            assert_eq!(*size, rows.len());
            *size
        }
        Node::Split { dim, value, left, right } => {
            let vals: Vec<f64> = rows.iter().map(|&r| f64::from(x.row(r)[*dim])).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo < *value && *value < hi, "split {value} not inside ({lo}, {hi})");
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| f64::from(x.row(i)[*dim]) < *value);
            assert!(!l.is_empty() && !r.is_empty());
            check_splits(left, x, &l, depth + 1, max_depth)
                + check_splits(right, x, &r, depth + 1, max_depth)
        }
    }
}

#[test]
fn trees_respect_structure_invariants() {
    let (x, _) = gen_planted_anomalies(&PlantedAnomalySpec::new(300, 10, 4, 5));
    let forest = fit_forest(&config(25, 64, 1), &x).unwrap();
    assert_eq!(forest.max_depth(), 6);
    for tree in forest.trees() {
        assert_eq!(tree.leaf_sizes().iter().sum::<usize>(), 64);
        assert!(tree.depth() <= 6);
    }

    // With ψ ≥ n every tree sees every row, so splits can be replayed exactly.
    let rows: Vec<[f32; 2]> = (0..30).map(|i| [(i * 7 % 11) as f32, (i % 5) as f32]).collect();
    let small = FeatureMatrix::from_rows(2, &rows).unwrap();
    let forest = fit_forest(&config(40, 256, 3), &small).unwrap();
    let all: Vec<usize> = (0..small.n()).collect();
    for tree in forest.trees() {
        assert_eq!(check_splits(tree.root(), &small, &all, 0, forest.max_depth()), 30);
    }
}

#[test]
fn fitting_is_deterministic_and_thread_independent() {
    let (x, _) = gen_planted_anomalies(&PlantedAnomalySpec::new(500, 20, 6, 9));
    let cfg = config(64, 256, 42);
    let a = fit_forest(&cfg, &x).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| fit_forest(&cfg, &x).unwrap());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_ne!(a, fit_forest(&config(64, 256, 43), &x).unwrap());
}

#[test]
fn two_point_isolation_depth_is_one() {
    let x = FeatureMatrix::from_rows(3, &[[0.0f32, 5.0, 1.0], [0.0, -2.0, 1.0]]).unwrap();
    let forest = fit_forest(&config(10_000, 256, 7), &x).unwrap();
    let mut total = 0usize;
    for tree in forest.trees() {
        for row in x.rows() {
            total += tree.isolation_depth(row).0;
        }
    }
    let mean = total as f64 / (2.0 * forest.trees().len() as f64);
    assert!((mean - avg_path_norm(2)).abs() <= 0.001, "mean depth {mean}");
}

#[test]
fn batch_scores_equal_per_sample_loop() {
    let (x, _) = gen_planted_anomalies(&PlantedAnomalySpec::new(200, 10, 3, 1));
    let forest = fit_forest(&config(30, 128, 2), &x).unwrap();
    let batch = score_batch(&forest, &x).unwrap();
    let looped: Vec<f64> = x.rows().map(|r| anomaly_score(&forest, r).unwrap()).collect();
    assert_eq!(batch, looped);
}

#[test]
fn planted_outliers_score_higher() {
    let (x, flags) = gen_planted_anomalies(&PlantedAnomalySpec::new(1000, 50, 8, 11));
    let forest = fit_forest(&config(100, 256, 1), &x).unwrap();
    let scores = score_batch(&forest, &x).unwrap();
    let mean = |want: bool| {
        let v: Vec<f64> = scores.iter().zip(&flags).filter(|(_, &f)| f == want).map(|(s, _)| *s).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(true) > mean(false));
    assert!(roc_auc(&scores, &flags) >= 0.95);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scores_lie_in_unit_interval_and_order_by_path(seed in any::<u64>(), n in 2usize..60, d in 1usize..4) {
        use rand::Rng;
        let mut rng = weakpu::seed::rng(seed);
        let data: Vec<f32> = (0..n * d).map(|_| rng.random_range(-3.0f32..3.0)).collect();
        let x = FeatureMatrix::new(d, data).unwrap();
        let forest = fit_forest(&config(15, 32, seed), &x).unwrap();
        let probes: Vec<Vec<f32>> = (0..10).map(|_| (0..d).map(|_| rng.random_range(-6.0f32..6.0)).collect()).collect();
        let mut pairs = Vec::new();
        for p in &probes {
            let s = anomaly_score(&forest, p).unwrap();
            prop_assert!(s > 0.0 && s <= 1.0);
            let h: f64 = forest.trees().iter().map(|t| path_length(t, p)).sum::<f64>() / forest.trees().len() as f64;
            pairs.push((s, h));
        }
        for &(s1, h1) in &pairs {
            for &(s2, h2) in &pairs {
                prop_assert_eq!(s1 > s2, h1 < h2);
            }
        }
    }
}
