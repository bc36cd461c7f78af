//! Vertically federated gradient boosting forest.
//!
//! Parties hold disjoint feature columns of the same samples; the active
//! party additionally holds the labels. Each boosting layer trains a small
//! forest on subsampled rows, aggregates the trees by averaging, and steps
//! the margin by a learning rate. Gradient and hessian histograms cross
//! party boundaries only under additive homomorphic encryption, and every
//! message is recorded in an auditable transcript.

pub mod bench;
pub mod crypto;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod protocol;
pub mod scheduler;
pub mod tree;

pub use error::{Error, Result};
