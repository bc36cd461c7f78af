//! The boosting engine.
//!
//! One trainer drives two interchangeable execution contexts through the
//! [`BoostContext`] trait: a federated context that works through the
//! message protocol with encrypted gradient aggregation, and a
//! centralized context that trains on the unioned plaintext columns.
//! Both receive identical sampling plans from the same seeded RNG, so
//! with the exact (mock) cipher backend they produce identical models —
//! which is the plaintext-equivalence check the test suite enforces.
//!
//! Training builds layers of small forests: each boosting round draws
//! per-tree row/feature subsamples at schedule-driven rates, fits every
//! tree to the current gradients, averages the member trees, and steps
//! the margins by the learning rate.

pub mod centralized;
pub mod federated;
pub mod sampling;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::{schedule_count, schedule_value, ScheduleSpec};
use crate::tree::grad::{leaf_weight, logistic_grad, GradPair};
use crate::tree::histogram::FeatureHistogram;
use crate::tree::model::{ResolvedModel, SplitRecord, TreeModel, TreeNode};
use crate::tree::split::{best_split, SplitCandidate, SplitConstraints};

pub use sampling::{draw_layer_plans, union_rows, TreePlan};

/// Execution backend of the trainer: everything the grow loop needs that
/// depends on where the data lives.
pub trait BoostContext {
    fn n_rows(&self) -> usize;
    fn n_features(&self) -> usize;
    /// Labels of the aligned rows; only the label holder's view.
    fn labels(&self) -> &[f64];
    /// Feature names in code order, for model export.
    fn feature_names(&self) -> Vec<String>;

    /// Announce a layer: its row union, per-tree plans, and the gradient
    /// pairs of the union rows (in union order).
    fn begin_layer(
        &mut self,
        layer: u32,
        union_rows: &[usize],
        plans: &[TreePlan],
        grads: &[GradPair],
    ) -> Result<()>;

    /// Gradient pair of a union row in the current layer.
    fn grad_of(&self, row: usize) -> Result<GradPair>;

    /// Histograms of every feature tree `tree` may split on, over `rows`.
    fn node_histograms(&mut self, tree: u32, rows: &[usize]) -> Result<Vec<FeatureHistogram>>;

    /// Commit a winning candidate with its owner; the returned record is
    /// all the trainer retains of the split.
    fn register_split(&mut self, tree: u32, cand: &SplitCandidate) -> Result<SplitRecord>;

    /// Route rows through a committed split: (left, right), both in the
    /// order of `rows`.
    fn partition(&mut self, record: &SplitRecord, rows: &[usize])
        -> Result<(Vec<usize>, Vec<usize>)>;

    /// Reveal all lookup tables and produce the exportable model. This is
    /// the explicit post-training export step.
    fn resolve(&self, model: &ProtocolModel) -> Result<ResolvedModel>;
}

/// Tree-growth parameters shared by every tree of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowSpec {
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub constraints: SplitConstraints,
}

/// One boosting layer in protocol form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolLayer {
    pub trees: Vec<TreeModel>,
}

/// The trained ensemble as the label holder sees it: split owners and
/// lookup ids, no thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolModel {
    pub learning_rate: f64,
    pub base_margin: f64,
    pub layers: Vec<ProtocolLayer>,
}

/// Full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rounds: u32,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    /// Quantile bin budget per feature.
    pub n_bins: usize,
    /// Trees per layer, by round.
    pub trees_per_layer: ScheduleSpec,
    /// Row-sample rate, by round.
    pub row_rate: ScheduleSpec,
    /// Feature-sample rate, by round.
    pub feature_rate: ScheduleSpec,
    pub constraints: SplitConstraints,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rounds: 20,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            max_depth: 3,
            n_bins: 32,
            trees_per_layer: ScheduleSpec::constant(1.0),
            row_rate: ScheduleSpec::constant(1.0),
            feature_rate: ScheduleSpec::constant(1.0),
            constraints: SplitConstraints::default(),
            seed: 17,
        }
    }
}

impl TrainConfig {
    pub fn grow_spec(&self) -> GrowSpec {
        GrowSpec {
            max_depth: self.max_depth,
            lambda: self.lambda,
            gamma: self.gamma,
            constraints: self.constraints,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.lambda < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidConfig("lambda and gamma must be non-negative".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
        }
        if self.n_bins < 2 {
            return Err(Error::InvalidBinCount(self.n_bins));
        }
        self.trees_per_layer.validate()?;
        self.row_rate.validate()?;
        self.feature_rate.validate()?;
        Ok(())
    }
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ProtocolModel,
    /// Final margins of the aligned training rows.
    pub margins: Vec<f64>,
    /// Per-round (trees, row_rate, feature_rate) actually used.
    pub round_loads: Vec<(usize, f64, f64)>,
    /// Wall time of each round, seconds.
    pub round_secs: Vec<f64>,
}

fn node_grad_sums(ctx: &dyn BoostContext, rows: &[usize]) -> Result<(f64, f64)> {
    let mut g = 0.0;
    let mut h = 0.0;
    for &row in rows {
        let gp = ctx.grad_of(row)?;
        g += gp.g;
        h += gp.h;
    }
    Ok((g, h))
}

fn grow_node(
    ctx: &mut dyn BoostContext,
    tree: u32,
    rows: &[usize],
    depth: usize,
    spec: &GrowSpec,
) -> Result<TreeNode> {
    let (g_sum, h_sum) = node_grad_sums(ctx, rows)?;
    let leaf = |g: f64, h: f64| -> Result<TreeNode> {
        Ok(TreeNode::Leaf { weight: leaf_weight(g, h, spec.lambda)? })
    };

    if depth >= spec.max_depth || rows.len() < 2 * spec.constraints.min_leaf_rows.max(1) {
        return leaf(g_sum, h_sum);
    }
    let hists = ctx.node_histograms(tree, rows)?;
    let Some(cand) = best_split(&hists, spec.lambda, spec.gamma, &spec.constraints) else {
        return leaf(g_sum, h_sum);
    };

    let record = ctx.register_split(tree, &cand)?;
    let (left_rows, right_rows) = ctx.partition(&record, rows)?;
    if left_rows.is_empty() || right_rows.is_empty() {
        // constraints should make this impossible; stay safe regardless
        return leaf(g_sum, h_sum);
    }
    Ok(TreeNode::Split {
        record,
        left: Box::new(grow_node(ctx, tree, &left_rows, depth + 1, spec)?),
        right: Box::new(grow_node(ctx, tree, &right_rows, depth + 1, spec)?),
    })
}

/// Grow one tree on its sampled rows.
pub fn grow_tree(
    ctx: &mut dyn BoostContext,
    tree: u32,
    rows: &[usize],
    spec: &GrowSpec,
) -> Result<TreeModel> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    Ok(TreeModel { root: grow_node(ctx, tree, rows, 0, spec)? })
}

/// Leaf values of `rows` under a protocol-form tree, via owner-routed
/// partitions; output is aligned with `rows`.
pub fn tree_values(
    ctx: &mut dyn BoostContext,
    tree: &TreeModel,
    rows: &[usize],
) -> Result<Vec<f64>> {
    fn walk(
        ctx: &mut dyn BoostContext,
        node: &TreeNode,
        rows: Vec<usize>,
        pos: &HashMap<usize, usize>,
        out: &mut [f64],
    ) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        match node {
            TreeNode::Leaf { weight } => {
                for row in rows {
                    out[pos[&row]] = *weight;
                }
                Ok(())
            }
            TreeNode::Split { record, left, right } => {
                let (l, r) = ctx.partition(record, &rows)?;
                walk(ctx, left, l, pos, out)?;
                walk(ctx, right, r, pos, out)
            }
        }
    }

    let pos: HashMap<usize, usize> = rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let mut out = vec![0.0; rows.len()];
    walk(ctx, &tree.root, rows.to_vec(), &pos, &mut out)?;
    Ok(out)
}

/// Margins of `rows` under a full protocol-form model.
pub fn model_margins(
    ctx: &mut dyn BoostContext,
    model: &ProtocolModel,
    rows: &[usize],
) -> Result<Vec<f64>> {
    let mut margins = vec![model.base_margin; rows.len()];
    for layer in &model.layers {
        let mut layer_sum = vec![0.0f64; rows.len()];
        for tree in &layer.trees {
            let vals = tree_values(ctx, tree, rows)?;
            for (acc, v) in layer_sum.iter_mut().zip(&vals) {
                *acc += v;
            }
        }
        let n_trees = layer.trees.len() as f64;
        for (m, s) in margins.iter_mut().zip(&layer_sum) {
            *m += model.learning_rate * (s / n_trees);
        }
    }
    Ok(margins)
}

/// Train a boosted forest in the given context.
pub fn train(ctx: &mut dyn BoostContext, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let n = ctx.n_rows();
    let d = ctx.n_features();
    if n == 0 || d == 0 {
        return Err(Error::EmptyRows);
    }
    let labels = ctx.labels().to_vec();
    if labels.len() != n {
        return Err(Error::InvalidConfig(format!(
            "got {} labels for {n} rows",
            labels.len()
        )));
    }

    let spec = config.grow_spec();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut margins = vec![0.0f64; n];
    let all_rows: Vec<usize> = (0..n).collect();
    let mut layers = Vec::with_capacity(config.rounds as usize);
    let mut round_loads = Vec::with_capacity(config.rounds as usize);
    let mut round_secs = Vec::with_capacity(config.rounds as usize);

    for layer_no in 1..=config.rounds {
        let round_start = std::time::Instant::now();
        let n_trees = schedule_count(&config.trees_per_layer, layer_no, config.rounds)?;
        let row_rate = schedule_value(&config.row_rate, layer_no, config.rounds)?;
        let feature_rate = schedule_value(&config.feature_rate, layer_no, config.rounds)?;
        round_loads.push((n_trees, row_rate, feature_rate));

        let plans = draw_layer_plans(&mut rng, n, d, n_trees, row_rate, feature_rate)?;
        let union = union_rows(&plans);
        let grads: Vec<GradPair> =
            union.iter().map(|&r| logistic_grad(margins[r], labels[r])).collect();
        ctx.begin_layer(layer_no, &union, &plans, &grads)?;

        let mut trees = Vec::with_capacity(n_trees);
        for (t, plan) in plans.iter().enumerate() {
            trees.push(grow_tree(ctx, t as u32, &plan.rows, &spec)?);
        }

        // margin step on every aligned row: learning rate times the
        // layer's tree average
        let mut layer_sum = vec![0.0f64; n];
        for tree in &trees {
            let vals = tree_values(ctx, tree, &all_rows)?;
            for (acc, v) in layer_sum.iter_mut().zip(&vals) {
                *acc += v;
            }
        }
        for (m, s) in margins.iter_mut().zip(&layer_sum) {
            *m += config.learning_rate * (s / n_trees as f64);
        }

        layers.push(ProtocolLayer { trees });
        round_secs.push(round_start.elapsed().as_secs_f64());
    }

    Ok(TrainOutcome {
        model: ProtocolModel {
            learning_rate: config.learning_rate,
            base_margin: 0.0,
            layers,
        },
        margins,
        round_loads,
        round_secs,
    })
}

/// Resolve helper shared by the contexts: walk the protocol model and
/// rewrite every split through `rule_of`.
pub(crate) fn resolve_with(
    model: &ProtocolModel,
    feature_names: Vec<String>,
    rule_of: &dyn Fn(&SplitRecord) -> Result<crate::tree::model::SplitRule>,
) -> Result<ResolvedModel> {
    use crate::tree::model::{ResolvedLayer, ResolvedNode, ResolvedSplit, ResolvedTree};

    fn walk(
        node: &TreeNode,
        rule_of: &dyn Fn(&SplitRecord) -> Result<crate::tree::model::SplitRule>,
    ) -> Result<ResolvedNode> {
        Ok(match node {
            TreeNode::Leaf { weight } => ResolvedNode::Leaf { weight: *weight },
            TreeNode::Split { record, left, right } => {
                let rule = rule_of(record)?;
                ResolvedNode::Split {
                    split: ResolvedSplit {
                        feature: rule.feature,
                        bin: rule.bin,
                        threshold: rule.threshold,
                        gain: record.gain,
                        default_left: rule.default_left,
                    },
                    left: Box::new(walk(left, rule_of)?),
                    right: Box::new(walk(right, rule_of)?),
                }
            }
        })
    }

    let mut layers = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let mut trees = Vec::with_capacity(layer.trees.len());
        for tree in &layer.trees {
            trees.push(ResolvedTree { root: walk(&tree.root, rule_of)? });
        }
        layers.push(ResolvedLayer { trees });
    }
    Ok(ResolvedModel {
        learning_rate: model.learning_rate,
        base_margin: model.base_margin,
        layers,
        feature_names,
    })
}
