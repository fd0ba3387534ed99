//! Weakly supervised (positive-unlabeled) defect detection in feature space.
//!
//! The pipeline takes a small set of samples known to belong to one class,
//! fits an [`iforest::IsolationForest`] on them, ranks an unlabeled pool by
//! anomaly score, takes the top-|P| samples as a counter-example class, and
//! trains a [`classifier`] on the balanced result. The [`eval`] module
//! compares that against a fully supervised baseline with stratified k-fold
//! cross-validation across a sweep of positive-labeled fractions.
//!
//! ```
//! use weakpu::data::make_pu_split;
//! use weakpu::pipeline::run_weak_pipeline;
//! use weakpu::synth::{gen_blobs, BlobSpec};
//! use weakpu::RunConfig;
//!
//! let data = gen_blobs(&BlobSpec { n_per_class: 100, d: 4, separation: 8.0, seed: 1 });
//! let split = make_pu_split(&data, 1, 0.2, 7).unwrap();
//!
//! let mut cfg = RunConfig::default();
//! cfg.classifier.epochs = 5;
//! let out = run_weak_pipeline(&split.dataset, &cfg).unwrap();
//! assert_eq!(out.predictions.len(), split.dataset.unlabeled.n());
//! ```

pub mod classifier;
pub mod config;
pub mod data;
mod error;
pub mod eval;
pub mod iforest;
pub mod io;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};
