//! Evaluation and error diagnosis for multi-instance keypoint detection.
//!
//! Detections are matched to ground truth with Object Keypoint Similarity
//! (OKS), evaluated as AP/AR over OKS thresholds, and then broken down into
//! localization, scoring and background errors. Ground truth can further be
//! stratified into occlusion/crowding and size benchmarks.
//!
//! The crate is organised bottom-up:
//!
//! - [`data_model`]: domain types, COCO-format ingestion, keypoint schema.
//! - [`similarity`]: keypoint similarity, OKS and constant calibration.
//! - [`matching`]: greedy matching, PR curves, AP and AR.
//! - [`taxonomy`]: Good/Jitter/Inversion/Swap/Miss classification.
//! - [`correction`]: error correction and progressive PR curves.
//! - [`scoring`]: scoring errors, optimal scores and soft-NMS.
//! - [`background`]: false positive / false negative analysis.
//! - [`benchmarks`]: occlusion, crowding and size stratification.
//! - [`fixtures`]: synthetic data with labeled error injection.

pub mod background;
pub mod benchmarks;
pub mod correction;
pub mod data_model;
mod error;
pub mod fixtures;
mod index;
pub mod matching;
pub mod scoring;
pub mod similarity;
mod stats;
pub mod taxonomy;

pub use error::{Error, Result};
pub use stats::Quartiles;
