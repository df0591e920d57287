//! Label-free accuracy prediction for trained classifiers.
//!
//! Given only the softmax outputs of a classifier on an unlabeled dataset,
//! this crate summarizes the dataset as a confidence-group set representation
//! and regresses overall and per-category accuracy with a multi-branch model
//! trained on labeled meta-sets.
//!
//! * [`data`] confidence matrices, labels, accuracies, CSV and manifest I/O
//! * [`representation`] High/Medium/Low groups and their statistics
//! * [`regressor`] the multi-branch model, its training and model files
//! * [`baselines`] prediction-score, entropy-score and average-confidence estimators
//! * [`metaset`] synthetic meta-set generation
//! * [`harness`] RMSE reports, benchmark and ablation drivers
//! * [`cli`] the `autoeval` command line

pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod harness;
pub mod metaset;
pub mod regressor;
pub mod representation;

pub use data::{compute_accuracy, AccuracyVector, ConfidenceMatrix, LabelVector, MetaSet};
pub use error::{Error, Result};
pub use regressor::{ModelConfig, MultiBranchModel, TrainConfig};
pub use representation::{extract_representation, ConfidenceGroup, GroupConfig, SetRepresentation};
