//! Metrics, stratified cross-validation and the positive-fraction sweep.
//!
//! All metrics treat label 1 as the positive class and are reported in
//! percent. Per-fold F1 is computed from that fold's precision and recall,
//! then averaged, so the mean F1 is generally not the harmonic mean of the
//! mean precision and mean recall.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, classify};
use crate::data::{make_pu_split, LabeledDataset};
use crate::pipeline::run_weak_pipeline;
use crate::seed;
use crate::{Error, Result, RunConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(predicted: &[u8], actual: &[u8]) -> Result<ConfusionCounts> {
    if predicted.len() != actual.len() {
        return Err(Error::Dimension {
            row: None,
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p == 1, a == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Accuracy, precision, recall and F1 in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when some ratio was 0/0 and was defined as 0.
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let mut degenerate = false;
    let accuracy = ratio(c.tp + c.tn, c.total(), &mut degenerate);
    let precision = ratio(c.tp, c.tp + c.fp, &mut degenerate);
    let recall = ratio(c.tp, c.tp + c.fn_, &mut degenerate);
    if precision + recall == 0.0 {
        degenerate = true;
    }
    Metrics {
        accuracy: 100.0 * accuracy,
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        f1: 100.0 * f1_from(precision, recall),
        degenerate,
    }
}

/// Sample standard deviation (`n − 1` denominator); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub per_fold: Vec<f64>,
}

impl MetricSummary {
    pub fn from_values(values: Vec<f64>) -> Self {
        let mean = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        MetricSummary {
            mean,
            std: sample_std(&values),
            per_fold: values,
        }
    }

    /// `mean (±std)` with two decimals.
    pub fn display(&self) -> String {
        format!("{:.2} (±{:.2})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    /// Folds where some metric hit a 0/0.
    pub degenerate_folds: Vec<usize>,
}

impl MetricsReport {
    pub fn from_folds(folds: &[Metrics]) -> Self {
        let pick = |f: fn(&Metrics) -> f64| MetricSummary::from_values(folds.iter().map(f).collect());
        MetricsReport {
            accuracy: pick(|m| m.accuracy),
            precision: pick(|m| m.precision),
            recall: pick(|m| m.recall),
            f1: pick(|m| m.f1),
            degenerate_folds: (0..folds.len()).filter(|&i| folds[i].degenerate).collect(),
        }
    }

    pub fn folds(&self) -> usize {
        self.accuracy.per_fold.len()
    }

    /// `(row label, summary)` in table order.
    pub fn rows(&self) -> [(&'static str, &MetricSummary); 4] {
        [
            ("Accuracy (%)", &self.accuracy),
            ("Precision (%)", &self.precision),
            ("Recall (%)", &self.recall),
            ("F1-score (%)", &self.f1),
        ]
    }
}

/// Splits indices into `k` test folds that preserve class proportions.
///
/// Each class is shuffled and dealt round-robin, the second class continuing
/// where the first stopped, so per-class counts and total fold sizes both
/// differ by at most one across folds.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = seed::rng(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::Stratification {
                class,
                count: members.len(),
                folds: k,
            });
        }
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Indices `0..n` not in `test` (which must be sorted).
pub fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - test.len());
    let mut t = test.iter().peekable();
    for i in 0..n {
        if t.peek() == Some(&&i) {
            t.next();
        } else {
            out.push(i);
        }
    }
    out
}

fn collect_folds(results: Vec<Result<Metrics>>) -> Result<MetricsReport> {
    let mut folds = Vec::with_capacity(results.len());
    for (fold, r) in results.into_iter().enumerate() {
        folds.push(r.map_err(|e| Error::Fold {
            fold,
            source: Box::new(e),
        })?);
    }
    Ok(MetricsReport::from_folds(&folds))
}

fn fold_plan(data: &LabeledDataset, cfg: &RunConfig) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    cfg.validate()?;
    let folds = stratified_kfold(&data.labels, cfg.folds, seed::derive(cfg.master_seed, "folds", 0))?;
    Ok(folds
        .into_iter()
        .map(|test| (complement(data.n(), &test), test))
        .collect())
}

/// Trains the classifier on every training split and scores its test split.
pub fn cross_validate_supervised(data: &LabeledDataset, cfg: &RunConfig) -> Result<MetricsReport> {
    let plan = fold_plan(data, cfg)?;
    let results = plan
        .par_iter()
        .enumerate()
        .map(|(fold, (train_idx, test_idx))| {
            let mut mlp = cfg.classifier.clone();
            mlp.seed = seed::derive(cfg.master_seed, "supervised", fold as u64);
            let model = classifier::train(&data.select(train_idx), &mlp)?;
            let test = data.select(test_idx);
            let probs = model.predict_batch(&test.features)?;
            Ok(metrics(&confusion(&classify(&probs, 0.5), &test.labels)?))
        })
        .collect();
    collect_folds(results)
}

/// Maps probabilities of the positive-labeled class back to ground-truth labels.
pub fn to_ground_truth(probs: &[f64], positive_class: u8) -> Vec<u8> {
    classify(probs, 0.5)
        .into_iter()
        .map(|l| if l == 1 { positive_class } else { 1 - positive_class })
        .collect()
}

/// Per fold: hide all labels in the training split except `positive_fraction`
/// of `positive_class`, run the weak pipeline, and score the untouched test
/// split against its true labels.
pub fn cross_validate_weak(data: &LabeledDataset, cfg: &RunConfig) -> Result<MetricsReport> {
    let plan = fold_plan(data, cfg)?;
    let results = plan
        .par_iter()
        .enumerate()
        .map(|(fold, (train_idx, test_idx))| {
            let f = fold as u64;
            let split = make_pu_split(
                &data.select(train_idx),
                cfg.positive_class,
                cfg.positive_fraction,
                seed::derive(cfg.master_seed, "pu-split", f),
            )?;
            let fold_cfg = RunConfig {
                master_seed: seed::derive(cfg.master_seed, "weak", f),
                ..cfg.clone()
            };
            let outcome = run_weak_pipeline(&split.dataset, &fold_cfg)?;
            let test = data.select(test_idx);
            let probs = outcome.classifier.predict_batch(&test.features)?;
            let predicted = to_ground_truth(&probs, cfg.positive_class);
            Ok(metrics(&confusion(&predicted, &test.labels)?))
        })
        .collect();
    collect_folds(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub positive_fraction: f64,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub baseline: MetricsReport,
    pub weak: Vec<SweepCell>,
}

/// `"5%"`, `"12.5%"`.
pub fn percent_label(fraction: f64) -> String {
    let pct = (fraction * 100.0 * 1e6).round() / 1e6;
    format!("{pct}%")
}

/// One weak cross-validation per fraction plus the supervised baseline.
pub fn run_sweep(data: &LabeledDataset, cfg: &RunConfig, fractions: &[f64]) -> Result<SweepResult> {
    cfg.validate()?;
    if fractions.is_empty() {
        return Err(Error::Config("no fractions to sweep".into()));
    }
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("fraction {f} not in (0, 1]")));
        }
    }
    let (baseline, weak) = rayon::join(
        || cross_validate_supervised(data, cfg),
        || {
            fractions
                .par_iter()
                .map(|&f| {
                    let cell_cfg = RunConfig {
                        positive_fraction: f,
                        ..cfg.clone()
                    };
                    cross_validate_weak(data, &cell_cfg)
                })
                .collect::<Vec<_>>()
        },
    );
    let baseline = baseline.map_err(|e| Error::Cell {
        cell: "supervised baseline".into(),
        source: Box::new(e),
    })?;
    let mut cells = Vec::with_capacity(fractions.len());
    for (&f, r) in fractions.iter().zip(weak) {
        let report = r.map_err(|e| Error::Cell {
            cell: format!("weak {}", percent_label(f)),
            source: Box::new(e),
        })?;
        cells.push(SweepCell {
            positive_fraction: f,
            report,
        });
    }
    Ok(SweepResult {
        baseline,
        weak: cells,
    })
}

impl SweepResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Header row followed by one row per metric; the first column holds row
    /// labels, then the baseline, then one column per fraction.
    pub fn table_cells(&self) -> Vec<Vec<String>> {
        let mut header = vec!["Positive-labeled".to_string(), "100%".to_string()];
        header.extend(self.weak.iter().map(|c| percent_label(c.positive_fraction)));
        let mut rows = vec![header];
        for (m, (label, base)) in self.baseline.rows().iter().enumerate() {
            let mut row = vec![label.to_string(), base.display()];
            row.extend(self.weak.iter().map(|c| c.report.rows()[m].1.display()));
            rows.push(row);
        }
        rows
    }

    /// Aligned text table: supervised column, then weakly supervised columns.
    pub fn render_table(&self) -> String {
        let cells = self.table_cells();
        let ncol = cells[0].len();
        let width: Vec<usize> = (0..ncol)
            .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w - s.chars().count()));
        let sep = "  ";

        let mut out = String::new();
        let weak_span: usize =
            width[2..].iter().sum::<usize>() + sep.len() * width.len().saturating_sub(3);
        let _ = writeln!(
            out,
            "{}{sep}{}{sep}{}",
            pad("", width[0]),
            pad("Supervised", width[1].max(10)),
            pad("Weakly supervised", weak_span.max(17)).trim_end()
        );
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| pad(s, if c == 1 { width[1].max(10) } else { width[c] }))
                .collect();
            let _ = writeln!(out, "{}", line.join(sep).trim_end());
        }
        out
    }

    /// One line per (setting, fold) with raw metric values.
    pub fn folds_csv(&self) -> String {
        let mut out =
            String::from("setting,positive_fraction,fold,accuracy,precision,recall,f1,degenerate\n");
        let mut emit = |setting: &str, fraction: f64, r: &MetricsReport| {
            for fold in 0..r.folds() {
                let _ = writeln!(
                    out,
                    "{setting},{fraction},{fold},{},{},{},{},{}",
                    r.accuracy.per_fold[fold],
                    r.precision.per_fold[fold],
                    r.recall.per_fold[fold],
                    r.f1.per_fold[fold],
                    r.degenerate_folds.contains(&fold)
                );
            }
        };
        emit("supervised", 1.0, &self.baseline);
        for cell in &self.weak {
            emit("weak", cell.positive_fraction, &cell.report);
        }
        out
    }
}

/// ROC AUC by counting every (positive, negative) pair; ties count one half.
pub fn roc_auc(scores: &[f64], is_positive: &[bool]) -> f64 {
    assert_eq!(scores.len(), is_positive.len());
    let (mut wins, mut pairs) = (0.0, 0usize);
    for (i, &pi) in is_positive.iter().enumerate() {
        if !pi {
            continue;
        }
        for (j, &pj) in is_positive.iter().enumerate() {
            if pj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    if pairs == 0 {
        0.5
    } else {
        wins / pairs as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_counts() {
        let c = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, fp: 0, tn: 1, fn_: 0 });
        let c = confusion(&[1; 4], &[0; 4]).unwrap();
        assert_eq!(c.fp, 4);
        assert!(confusion(&[1], &[1, 0]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn perfect_and_degenerate_metrics() {
        let m = metrics(&ConfusionCounts { tp: 3, fp: 0, tn: 2, fn_: 0 });
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (100.0, 100.0, 100.0, 100.0));
        assert!(!m.degenerate);

        let m = metrics(&ConfusionCounts { tp: 0, fp: 0, tn: 4, fn_: 2 });
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(m.degenerate);
    }

    #[test]
    fn f1_from_published_supervised_column() {
        assert!((f1_from(93.68, 89.00) - 91.28).abs() < 0.01);
    }

    #[test]
    fn summary_formatting_and_std() {
        let s = MetricSummary::from_values(vec![96.6, 96.7, 96.8, 96.65, 96.65]);
        assert!((s.mean - 96.68).abs() < 1e-9);
        let direct = (s.per_fold.iter().map(|v| (v - s.mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((s.std - direct).abs() < 1e-12);
        assert_eq!(s.display(), format!("96.68 (±{:.2})", direct));
        assert_eq!(sample_std(&[5.0]), 0.0);
    }

    #[test]
    fn balanced_folds_get_one_of_each() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let folds = stratified_kfold(&labels, 5, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().filter(|&&i| labels[i] == 1).count(), 1);
        }
    }

    #[test]
    fn small_class_cannot_be_stratified() {
        let labels = [0, 0, 0, 0, 0, 1, 1];
        assert!(matches!(
            stratified_kfold(&labels, 5, 0),
            Err(Error::Stratification { class: 1, count: 2, folds: 5 })
        ));
    }

    #[test]
    fn complement_of_fold() {
        assert_eq!(complement(6, &[1, 4]), vec![0, 2, 3, 5]);
        assert_eq!(complement(2, &[]), vec![0, 1]);
    }

    #[test]
    fn percent_labels() {
        assert_eq!(percent_label(0.05), "5%");
        assert_eq!(percent_label(0.3), "30%");
        assert_eq!(percent_label(0.125), "12.5%");
    }

    #[test]
    fn auc_by_pairs() {
        assert_eq!(roc_auc(&[0.9, 0.1, 0.8, 0.2], &[true, false, true, false]), 1.0);
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.9], &[true, false]), 0.0);
    }
}
