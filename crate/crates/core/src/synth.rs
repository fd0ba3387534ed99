//! Seeded synthetic datasets with known ground truth.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabeledDataset};
use crate::seed::{self, BoxMuller};

/// Two identity-covariance Gaussian classes whose means sit at
/// `±(separation / 2) · (1, …, 1) / √d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub n_per_class: usize,
    pub d: usize,
    pub separation: f64,
    pub seed: u64,
}

/// Standard-normal inliers plus outliers spread uniformly over the spherical
/// shell `r_min ≤ ‖x‖ ≤ r_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedAnomalySpec {
    pub n_inliers: usize,
    pub n_outliers: usize,
    pub d: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl PlantedAnomalySpec {
    pub fn new(n_inliers: usize, n_outliers: usize, d: usize, seed: u64) -> Self {
        PlantedAnomalySpec {
            n_inliers,
            n_outliers,
            d,
            r_min: 6.0,
            r_max: 10.0,
            seed,
        }
    }
}

/// Class 1 rows first, then class 0.
pub fn gen_blobs(spec: &BlobSpec) -> LabeledDataset {
    assert!(spec.n_per_class >= 1 && spec.d >= 1 && spec.separation >= 0.0);
    let mut rng = seed::rng(spec.seed);
    let mut normal = BoxMuller::new();
    let shift = spec.separation / 2.0 / (spec.d as f64).sqrt();
    let mut data = Vec::with_capacity(2 * spec.n_per_class * spec.d);
    let mut labels = Vec::with_capacity(2 * spec.n_per_class);
    for (class, sign) in [(1u8, 1.0), (0u8, -1.0)] {
        for _ in 0..spec.n_per_class {
            for _ in 0..spec.d {
                data.push((sign * shift + normal.sample(&mut rng)) as f32);
            }
            labels.push(class);
        }
    }
    let features = FeatureMatrix::new(spec.d, data).expect("finite by construction");
    LabeledDataset::new(features, labels).expect("consistent by construction")
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt()
}

/// Returns the features and a per-row outlier flag. Rows are shuffled.
///
/// Inliers with norm `≥ r_min` are redrawn, and outliers whose stored `f32`
/// norm falls outside the shell are redrawn, so the bounds hold exactly.
pub fn gen_planted_anomalies(spec: &PlantedAnomalySpec) -> (FeatureMatrix, Vec<bool>) {
    assert!(spec.n_inliers >= 1 && spec.d >= 1);
    assert!(spec.r_min > 3.0 && spec.r_max >= spec.r_min);
    let mut rng = seed::rng(spec.seed);
    let mut normal = BoxMuller::new();
    let d = spec.d;
    let mut rows: Vec<(Vec<f32>, bool)> = Vec::with_capacity(spec.n_inliers + spec.n_outliers);

    while rows.len() < spec.n_inliers {
        let v: Vec<f32> = (0..d).map(|_| normal.sample(&mut rng) as f32).collect();
        if norm(&v) < spec.r_min {
            rows.push((v, false));
        }
    }

    // Radius with density ∝ r^(d−1) makes the shell uniformly filled.
    let (lo, hi) = (spec.r_min.powi(d as i32), spec.r_max.powi(d as i32));
    while rows.len() < spec.n_inliers + spec.n_outliers {
        let dir: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let r = (lo + rng.random::<f64>() * (hi - lo)).powf(1.0 / d as f64);
        let v: Vec<f32> = dir.iter().map(|x| (x / len * r) as f32).collect();
        let n = norm(&v);
        if n >= spec.r_min && n <= spec.r_max {
            rows.push((v, true));
        }
    }

    rows.shuffle(&mut rng);
    let flags = rows.iter().map(|(_, f)| *f).collect();
    let data: Vec<f32> = rows.into_iter().flat_map(|(v, _)| v).collect();
    (FeatureMatrix::new(d, data).expect("finite by construction"), flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_mean(ds: &LabeledDataset, class: u8, col: usize) -> f64 {
        let rows = ds.indices_of(class);
        rows.iter().map(|&r| f64::from(ds.features.row(r)[col])).sum::<f64>() / rows.len() as f64
    }

    #[test]
    fn zero_separation_centers_both_classes() {
        let (n, d) = (400, 5);
        let ds = gen_blobs(&BlobSpec { n_per_class: n, d, separation: 0.0, seed: 2 });
        for class in [0, 1] {
            let rows = ds.indices_of(class);
            let total: f64 = rows
                .iter()
                .flat_map(|&r| ds.features.row(r).iter().map(|&v| f64::from(v)))
                .sum();
            let mean = total / (n * d) as f64;
            assert!(mean.abs() < 4.0 / ((n * d) as f64).sqrt(), "class {class}: {mean}");
        }
    }

    #[test]
    fn separated_means_in_one_dimension() {
        let ds = gen_blobs(&BlobSpec { n_per_class: 500, d: 1, separation: 8.0, seed: 4 });
        assert!((column_mean(&ds, 1, 0) - 4.0).abs() < 0.2);
        assert!((column_mean(&ds, 0, 0) + 4.0).abs() < 0.2);
    }

    #[test]
    fn blobs_are_seeded() {
        let spec = BlobSpec { n_per_class: 10, d: 3, separation: 2.0, seed: 8 };
        assert_eq!(gen_blobs(&spec), gen_blobs(&spec));
        assert_ne!(gen_blobs(&spec), gen_blobs(&BlobSpec { seed: 9, ..spec }));
    }

    #[test]
    fn planted_norms_respect_bounds() {
        let spec = PlantedAnomalySpec::new(1000, 50, 8, 3);
        let (x, flags) = gen_planted_anomalies(&spec);
        assert_eq!(x.n(), 1050);
        assert_eq!(flags.iter().filter(|&&f| f).count(), 50);
        for (row, &outlier) in x.rows().zip(&flags) {
            let n = norm(row);
            if outlier {
                assert!((6.0..=10.0).contains(&n), "outlier norm {n}");
            } else {
                assert!(n < 6.0, "inlier norm {n}");
            }
        }
        assert_eq!(gen_planted_anomalies(&spec), (x, flags));
    }
}
