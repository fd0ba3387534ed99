//! Samples, labels and positive-unlabeled splits.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

/// An `n × d` row-major table of finite `f32` feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    d: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major values. `d` must be at least 1.
    pub fn new(d: usize, data: Vec<f32>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Dimension {
                row: None,
                expected: 1,
                actual: 0,
            });
        }
        if data.len() % d != 0 {
            return Err(Error::Dimension {
                row: Some(data.len() / d),
                expected: d,
                actual: data.len() % d,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Value {
                row: pos / d,
                col: pos % d,
                value: f64::from(data[pos]),
            });
        }
        Ok(FeatureMatrix { d, data })
    }

    pub fn empty(d: usize) -> Result<Self> {
        Self::new(d, Vec::new())
    }

    pub fn from_rows<R: AsRef<[f32]>>(d: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::Dimension {
                    row: Some(i),
                    expected: d,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(d, data)
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Copies the given rows, in the given order, into a new matrix.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix { d: self.d, data }
    }

    /// Stacks `other` below `self`.
    pub fn concat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if other.d != self.d {
            return Err(Error::Dimension {
                row: None,
                expected: self.d,
                actual: other.d,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FeatureMatrix { d: self.d, data })
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.d == expected {
            Ok(())
        } else {
            Err(Error::Dimension {
                row: None,
                expected,
                actual: self.d,
            })
        }
    }
}

/// Label codes as stored in feature files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SampleLabel {
    Negative,
    Positive,
    Unlabeled,
}

impl SampleLabel {
    pub fn code(self) -> i8 {
        match self {
            SampleLabel::Positive => 1,
            SampleLabel::Negative => 0,
            SampleLabel::Unlabeled => -1,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(SampleLabel::Positive),
            0 => Some(SampleLabel::Negative),
            -1 => Some(SampleLabel::Unlabeled),
            _ => None,
        }
    }

    pub fn from_class(class: u8) -> Self {
        if class == 1 {
            SampleLabel::Positive
        } else {
            SampleLabel::Negative
        }
    }
}

/// Features with a binary label (0 or 1) per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != features.n() {
            return Err(Error::Dimension {
                row: None,
                expected: features.n(),
                actual: labels.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::format(Some(i), format!("label {} is not 0 or 1", labels[i])));
        }
        Ok(LabeledDataset { features, labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    pub fn indices_of(&self, class: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// A positive-labeled set plus an unlabeled pool of arbitrary true classes.
///
/// `hidden_truth` holds the true labels of the unlabeled rows for evaluation.
/// No pipeline stage reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct PuDataset {
    pub positives: FeatureMatrix,
    pub unlabeled: FeatureMatrix,
    pub hidden_truth: Option<Vec<u8>>,
}

impl PuDataset {
    pub fn new(
        positives: FeatureMatrix,
        unlabeled: FeatureMatrix,
        hidden_truth: Option<Vec<u8>>,
    ) -> Result<Self> {
        if positives.is_empty() {
            return Err(Error::EmptyClass { class: 1 });
        }
        unlabeled.check_dim(positives.d())?;
        if let Some(t) = &hidden_truth {
            if t.len() != unlabeled.n() {
                return Err(Error::Dimension {
                    row: None,
                    expected: unlabeled.n(),
                    actual: t.len(),
                });
            }
        }
        Ok(PuDataset {
            positives,
            unlabeled,
            hidden_truth,
        })
    }

    pub fn d(&self) -> usize {
        self.positives.d()
    }
}

/// Result of [`make_pu_split`]: the PU dataset plus the original row indices
/// that went into each side.
#[derive(Debug, Clone, PartialEq)]
pub struct PuSplit {
    pub dataset: PuDataset,
    pub positive_indices: Vec<usize>,
    pub unlabeled_indices: Vec<usize>,
}

/// Number of positive-labeled samples for a fraction: `max(1, floor(f · n))`.
pub fn positive_count(fraction: f64, n_pos: usize) -> usize {
    // The epsilon keeps exact products such as 0.3 · 10 from flooring to 2.
    let raw = (fraction * n_pos as f64 + 1e-9).floor() as usize;
    raw.clamp(1, n_pos.max(1))
}

/// Draws `count` distinct indices from `0..n` with a partial Fisher–Yates shuffle.
pub fn sample_without_replacement(n: usize, count: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let count = count.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx
}

/// Hides the labels of a fully labeled dataset, keeping a uniformly drawn
/// fraction of `positive_class` as the positive-labeled set.
pub fn make_pu_split(
    full: &LabeledDataset,
    positive_class: u8,
    positive_fraction: f64,
    seed: u64,
) -> Result<PuSplit> {
    if !(positive_fraction > 0.0 && positive_fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "positive_fraction must be in (0, 1], got {positive_fraction}"
        )));
    }
    if positive_class > 1 {
        return Err(Error::Argument(format!(
            "positive_class must be 0 or 1, got {positive_class}"
        )));
    }
    let class_rows = full.indices_of(positive_class);
    if class_rows.is_empty() {
        return Err(Error::EmptyClass {
            class: positive_class,
        });
    }
    let k = positive_count(positive_fraction, class_rows.len());
    let mut rng = seed::rng(seed);
    let picks = sample_without_replacement(class_rows.len(), k, &mut rng);

    let mut is_positive = vec![false; full.n()];
    let positive_indices: Vec<usize> = picks.iter().map(|&p| class_rows[p]).collect();
    for &i in &positive_indices {
        is_positive[i] = true;
    }
    let unlabeled_indices: Vec<usize> = (0..full.n()).filter(|&i| !is_positive[i]).collect();

    let dataset = PuDataset {
        positives: full.features.select(&positive_indices),
        unlabeled: full.features.select(&unlabeled_indices),
        hidden_truth: Some(unlabeled_indices.iter().map(|&i| full.labels[i]).collect()),
    };
    Ok(PuSplit {
        dataset,
        positive_indices,
        unlabeled_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(labels: &[u8]) -> LabeledDataset {
        let rows: Vec<[f32; 1]> = (0..labels.len()).map(|i| [i as f32]).collect();
        LabeledDataset::new(FeatureMatrix::from_rows(1, &rows).unwrap(), labels.to_vec()).unwrap()
    }

    #[test]
    fn matrix_rejects_non_finite() {
        let err = FeatureMatrix::new(2, vec![0.0, 1.0, f32::NAN, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Value { row: 1, col: 0, .. }));
    }

    #[test]
    fn matrix_rejects_ragged_rows() {
        let err = FeatureMatrix::from_rows(2, &[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::Dimension { row: Some(1), .. }));
    }

    #[test]
    fn empty_matrix_keeps_dimension() {
        let m = FeatureMatrix::empty(8).unwrap();
        assert_eq!((m.n(), m.d()), (0, 8));
    }

    #[test]
    fn positive_count_floors_with_minimum_one() {
        assert_eq!(positive_count(0.05, 11075), 553);
        assert_eq!(positive_count(0.01, 10), 1);
        assert_eq!(positive_count(1.0, 10), 10);
        assert_eq!(positive_count(0.3, 10), 3);
    }

    #[test]
    fn full_fraction_leaves_only_other_class_unlabeled() {
        let mut labels = vec![1u8; 10];
        labels.extend(vec![0u8; 7]);
        let split = make_pu_split(&ds(&labels), 1, 1.0, 3).unwrap();
        assert_eq!(split.dataset.positives.n(), 10);
        assert_eq!(split.dataset.hidden_truth.unwrap(), vec![0u8; 7]);
    }

    #[test]
    fn split_requires_the_class() {
        let err = make_pu_split(&ds(&[0, 0, 0]), 1, 0.5, 1).unwrap_err();
        assert!(matches!(err, Error::EmptyClass { class: 1 }));
    }

    #[test]
    fn split_is_deterministic_in_seed() {
        let labels: Vec<u8> = (0..2000).map(|i| (i % 2) as u8).collect();
        let data = ds(&labels);
        let a = make_pu_split(&data, 0, 0.1, 11).unwrap();
        let b = make_pu_split(&data, 0, 0.1, 11).unwrap();
        let c = make_pu_split(&data, 0, 0.1, 12).unwrap();
        assert_eq!(a.positive_indices, b.positive_indices);
        assert_ne!(a.positive_indices, c.positive_indices);
        assert_eq!(a.positive_indices.len(), 100);
    }

    #[test]
    fn pu_dataset_checks_truth_length() {
        let p = FeatureMatrix::from_rows(1, &[[1.0f32]]).unwrap();
        let u = FeatureMatrix::from_rows(1, &[[1.0f32], [2.0]]).unwrap();
        assert!(PuDataset::new(p, u, Some(vec![0])).is_err());
    }
}
