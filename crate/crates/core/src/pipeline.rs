//! Counter-example mining and the end-to-end weak-supervision pipeline.
//!
//! ```text
//! P ──fit_forest──▶ forest ──score U──▶ RankedPool ──top |P|──▶ counter-examples
//!                                                                   │
//! P (label 1) + counter-examples (label 0) ──shuffle──▶ train ──▶ classifier
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::classifier::{self, MlpConfig, TrainedClassifier};
use crate::data::{FeatureMatrix, LabeledDataset, PuDataset};
use crate::iforest::{fit_forest, score_batch, ForestConfig, IsolationForest};
use crate::seed;
use crate::{Error, Result, RunConfig};

/// Unlabeled indices sorted by anomaly score, most anomalous first. Ties keep
/// ascending index order. `scores[i]` is the score of `order[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPool {
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
}

impl RankedPool {
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyInput("unlabeled pool"));
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // Stable, so equal scores stay in index order.
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let sorted = order.iter().map(|&i| scores[i]).collect();
        Ok(RankedPool {
            order,
            scores: sorted,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `rank,unlabeled_index,score`, rank starting at 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,unlabeled_index,score\n");
        for (r, (i, s)) in self.order.iter().zip(&self.scores).enumerate() {
            let _ = writeln!(out, "{},{},{}", r + 1, i, s);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut order = Vec::new();
        let mut scores = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (line_no == 0 && line.starts_with("rank")) {
                continue;
            }
            let row = order.len();
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::format(Some(row), "expected rank,unlabeled_index,score"));
            }
            let rank: usize = fields[0]
                .parse()
                .map_err(|_| Error::format(Some(row), "bad rank"))?;
            if rank != row + 1 {
                return Err(Error::format(Some(row), format!("rank {rank} out of sequence")));
            }
            order.push(
                fields[1]
                    .parse()
                    .map_err(|_| Error::format(Some(row), "bad index"))?,
            );
            let s: f64 = fields[2]
                .parse()
                .map_err(|_| Error::format(Some(row), "bad score"))?;
            if let Some(&prev) = scores.last() {
                if s > prev {
                    return Err(Error::format(Some(row), "scores must be non-increasing"));
                }
            }
            scores.push(s);
        }
        Ok(RankedPool { order, scores })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

pub fn rank_unlabeled(forest: &IsolationForest, unlabeled: &FeatureMatrix) -> Result<RankedPool> {
    if unlabeled.is_empty() {
        return Err(Error::EmptyInput("unlabeled pool"));
    }
    RankedPool::from_scores(&score_batch(forest, unlabeled)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterExampleSet {
    /// Indices into the unlabeled pool, most anomalous first.
    pub indices: Vec<usize>,
}

impl CounterExampleSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// The first `min(k, |U|)` entries of the ranking.
pub fn mine_counter_examples(pool: &RankedPool, k: usize) -> Result<CounterExampleSet> {
    if k < 1 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    Ok(CounterExampleSet {
        indices: pool.order[..k.min(pool.len())].to_vec(),
    })
}

/// Recorded when the pool is too small to match |P|.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Imbalance {
    pub positives: usize,
    pub counter_examples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSet {
    pub dataset: LabeledDataset,
    pub imbalance: Option<Imbalance>,
}

/// Positives labeled 1 plus counter-examples labeled 0, rows shuffled by `seed`.
pub fn assemble_training_set(
    positives: &FeatureMatrix,
    unlabeled: &FeatureMatrix,
    counter_examples: &CounterExampleSet,
    seed: u64,
) -> Result<AssembledSet> {
    unlabeled.check_dim(positives.d())?;
    if let Some(&bad) = counter_examples.indices.iter().find(|&&i| i >= unlabeled.n()) {
        return Err(Error::Argument(format!(
            "counter-example index {bad} outside unlabeled pool of {}",
            unlabeled.n()
        )));
    }
    let negatives = unlabeled.select(&counter_examples.indices);
    let stacked = positives.concat(&negatives)?;
    let mut labels = vec![1u8; positives.n()];
    labels.extend(std::iter::repeat_n(0u8, negatives.n()));

    let mut order: Vec<usize> = (0..stacked.n()).collect();
    order.shuffle(&mut seed::rng(seed));
    let dataset = LabeledDataset::new(stacked, labels)?.select(&order);

    let imbalance = (negatives.n() < positives.n()).then(|| {
        log::warn!(
            "unlabeled pool too small: {} counter-examples for {} positives",
            negatives.n(),
            positives.n()
        );
        Imbalance {
            positives: positives.n(),
            counter_examples: negatives.n(),
        }
    });
    Ok(AssembledSet { dataset, imbalance })
}

/// Seeds for each stage, derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub forest: u64,
    pub assemble: u64,
    pub classifier: u64,
}

impl StageSeeds {
    pub fn from_master(master: u64) -> Self {
        StageSeeds {
            forest: seed::derive(master, "forest", 0),
            assemble: seed::derive(master, "assemble", 0),
            classifier: seed::derive(master, "classifier", 0),
        }
    }

    pub fn forest_config(&self, base: &ForestConfig) -> ForestConfig {
        ForestConfig {
            seed: self.forest,
            ..base.clone()
        }
    }

    pub fn classifier_config(&self, base: &MlpConfig) -> MlpConfig {
        MlpConfig {
            seed: self.classifier,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeakOutcome {
    pub classifier: TrainedClassifier,
    /// Probability of the positive-labeled class for every unlabeled row.
    pub predictions: Vec<f64>,
    pub pool: RankedPool,
    pub counter_examples: CounterExampleSet,
    pub imbalance: Option<Imbalance>,
}

/// Fits the forest on P, ranks U, mines `k = |P|` counter-examples, and
/// trains the classifier on the balanced set. Errors carry the stage name.
pub fn run_weak_pipeline(pu: &PuDataset, cfg: &RunConfig) -> Result<WeakOutcome> {
    let seeds = StageSeeds::from_master(cfg.master_seed);
    if pu.positives.n() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: pu.positives.n(),
        }
        .in_stage("positive set"));
    }
    let forest = fit_forest(&seeds.forest_config(&cfg.forest), &pu.positives)
        .map_err(|e| e.in_stage("fit_forest"))?;
    let pool = rank_unlabeled(&forest, &pu.unlabeled).map_err(|e| e.in_stage("rank"))?;
    let counter_examples =
        mine_counter_examples(&pool, pu.positives.n()).map_err(|e| e.in_stage("mine"))?;
    let assembled =
        assemble_training_set(&pu.positives, &pu.unlabeled, &counter_examples, seeds.assemble)
            .map_err(|e| e.in_stage("assemble"))?;
    let model = classifier::train(
        &assembled.dataset,
        &seeds.classifier_config(&cfg.classifier),
    )
    .map_err(|e| e.in_stage("train"))?;
    let predictions = model
        .predict_batch(&pu.unlabeled)
        .map_err(|e| e.in_stage("predict"))?;
    Ok(WeakOutcome {
        classifier: model,
        predictions,
        pool,
        counter_examples,
        imbalance: assembled.imbalance,
    })
}
