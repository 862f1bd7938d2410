//! convkit: a from-scratch convolutional network toolkit built around a
//! freeze-and-retrain transfer-learning workflow.
//!
//! The pieces:
//!
//! - [`nn`] — feature volumes, conv/pool/dense/softmax layers with exact
//!   forward semantics and backpropagation, model serialization, and a
//!   finite-difference gradient checker.
//! - [`train`] — cross-entropy, SGD, full network training with
//!   per-epoch logging.
//! - [`transfer`] — bottleneck-feature caching and retraining of the
//!   final dense softmax head against a frozen feature extractor.
//! - [`augment`] — deterministic rotate/translate/lighting/flip
//!   transforms that expand a dataset 6×.
//! - [`dataset`] — PPM decoding, bilinear resizing, directory-per-class
//!   ingestion, stratified splits, and a synthetic shapes generator.
//! - [`eval`] — confusion matrices, precision/recall/accuracy/F1 with
//!   macro averages, and report/curve emission.
//!
//! Everything seeded is bitwise deterministic: the same seed, data, and
//! configuration reproduce identical models, caches, and reports.

pub mod augment;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod image;
pub mod nn;
pub mod rng;
pub mod train;
pub mod transfer;

pub use error::{Error, Result};
