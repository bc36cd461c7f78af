//! Tree and ensemble models, in two representations.
//!
//! During federated training the label holder only ever learns *who* owns
//! a split and an opaque lookup id; the owning party keeps the actual
//! feature, bin and threshold in a private lookup table. That protocol
//! form is [`TreeModel`].
//!
//! For export, evaluation outside the federation, and equivalence checks,
//! every owner reveals its lookup table and the model *resolves* into
//! plain splits — [`ResolvedModel`] — which serializes to canonical JSON.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureCode, PartyId};
use crate::error::{Error, Result};
use crate::tree::grad::sigmoid;

/// What the label holder sees of a split: owner and an opaque handle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub owner: PartyId,
    pub lookup_id: u64,
    pub gain: f64,
}

/// A split as its owner stores it privately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: FeatureCode,
    /// Left child takes bins `0..=bin`.
    pub bin: u16,
    /// Raw-value form of the same boundary: left means `value <= threshold`.
    pub threshold: f64,
    pub default_left: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split { record: SplitRecord, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf { weight: f64 },
}

/// One trained tree in protocol form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
}

impl TreeModel {
    pub fn leaf_count(&self) -> usize {
        fn walk(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Split { left, right, .. } => walk(left) + walk(right),
            }
        }
        walk(&self.root)
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

/// A fully revealed split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSplit {
    pub feature: FeatureCode,
    pub bin: u16,
    pub threshold: f64,
    pub gain: f64,
    pub default_left: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ResolvedNode {
    Split { split: ResolvedSplit, left: Box<ResolvedNode>, right: Box<ResolvedNode> },
    Leaf { weight: f64 },
}

impl ResolvedNode {
    /// Route one row by raw feature values; `features[code]` is the value
    /// of the feature with that code, NaN when missing.
    pub fn evaluate(&self, value_of: &dyn Fn(FeatureCode) -> f64) -> f64 {
        match self {
            ResolvedNode::Leaf { weight } => *weight,
            ResolvedNode::Split { split, left, right } => {
                let v = value_of(split.feature);
                let go_left =
                    if v.is_nan() { split.default_left } else { v <= split.threshold };
                if go_left { left.evaluate(value_of) } else { right.evaluate(value_of) }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTree {
    pub root: ResolvedNode,
}

/// One boosting layer: a small forest whose outputs are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedLayer {
    pub trees: Vec<ResolvedTree>,
}

impl ResolvedLayer {
    /// Layer output for one row: the plain mean over member trees.
    pub fn evaluate(&self, value_of: &dyn Fn(FeatureCode) -> f64) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.root.evaluate(value_of)).sum();
        sum / self.trees.len() as f64
    }
}

/// A complete boosted forest with everything revealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedModel {
    pub learning_rate: f64,
    pub base_margin: f64,
    pub layers: Vec<ResolvedLayer>,
    /// Feature names by code index, for schema checks at prediction time.
    pub feature_names: Vec<String>,
}

impl ResolvedModel {
    /// Additive margin of one row.
    pub fn margin(&self, value_of: &dyn Fn(FeatureCode) -> f64) -> f64 {
        self.base_margin
            + self.learning_rate
                * self.layers.iter().map(|l| l.evaluate(value_of)).sum::<f64>()
    }

    /// Predicted probability of the positive class.
    pub fn predict_proba(&self, value_of: &dyn Fn(FeatureCode) -> f64) -> f64 {
        sigmoid(self.margin(value_of))
    }

    /// Margins for a column-major feature matrix `columns[code][row]`.
    pub fn margin_batch(&self, columns: &[Vec<f64>]) -> Vec<f64> {
        let rows = columns.first().map_or(0, Vec::len);
        (0..rows).map(|r| self.margin(&|f: FeatureCode| columns[f.0 as usize][r])).collect()
    }

    /// Canonical byte form; two models are the same model iff these agree.
    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn save<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let model: ResolvedModel = serde_json::from_reader(std::io::BufReader::new(file))?;
        if model.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("model learning_rate must be positive".into()));
        }
        if model.layers.iter().any(|l| l.trees.is_empty()) {
            return Err(Error::InvalidConfig("model contains an empty layer".into()));
        }
        Ok(model)
    }
}
