//! Per-tree subsampling plans.
//!
//! Every tree of a layer draws its own rows and features without
//! replacement from one master RNG, sequentially, so a (seed, schedule)
//! pair fully determines every plan of a run regardless of which context
//! executes it.

use rand::seq::index;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureCode;
use crate::error::{Error, Result};

/// What one tree trains on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreePlan {
    /// Global row indices, ascending.
    pub rows: Vec<usize>,
    /// Feature codes across all parties, ascending.
    pub features: Vec<FeatureCode>,
}

/// Draw the plans of one layer: `n_trees` independent (row, feature)
/// subsamples at the layer's rates.
pub fn draw_layer_plans(
    rng: &mut ChaCha12Rng,
    n_rows: usize,
    n_features: usize,
    n_trees: usize,
    row_rate: f64,
    feature_rate: f64,
) -> Result<Vec<TreePlan>> {
    if n_trees == 0 {
        return Err(Error::InvalidConfig("a layer needs at least one tree".into()));
    }
    let row_count = ((n_rows as f64) * row_rate).round() as usize;
    if row_count == 0 {
        return Err(Error::EmptySample("row subsample is empty; raise the sample rate"));
    }
    let feature_count = ((n_features as f64) * feature_rate).round() as usize;
    if feature_count == 0 {
        return Err(Error::EmptySample("feature subsample is empty; raise the feature rate"));
    }
    let row_count = row_count.min(n_rows);
    let feature_count = feature_count.min(n_features);

    let mut plans = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let mut rows = index::sample(rng, n_rows, row_count).into_vec();
        rows.sort_unstable();
        let mut features: Vec<FeatureCode> = index::sample(rng, n_features, feature_count)
            .into_iter()
            .map(|i| FeatureCode(i as u32))
            .collect();
        features.sort_unstable();
        plans.push(TreePlan { rows, features });
    }
    Ok(plans)
}

/// Ascending union of all plans' rows.
pub fn union_rows(plans: &[TreePlan]) -> Vec<usize> {
    let mut rows: Vec<usize> = plans.iter().flat_map(|p| p.rows.iter().copied()).collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}
