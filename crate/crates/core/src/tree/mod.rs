//! Gradient statistics, histograms, split search and tree models.

pub mod grad;
pub mod histogram;
pub mod model;
pub mod split;

pub use grad::{leaf_weight, logistic_grad, sigmoid, GradPair};
pub use histogram::{build_histogram, FeatureHistogram};
pub use model::{ResolvedModel, TreeModel};
pub use split::{best_split, split_gain, SplitCandidate, SplitConstraints};
