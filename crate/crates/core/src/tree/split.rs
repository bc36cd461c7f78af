//! Histogram-based split search.
//!
//! Candidates sit at every interior bin boundary of every feature. The
//! score of a candidate is the regularized gain
//!
//! ```text
//! 1/2 [ G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda) ] - gamma
//! ```
//!
//! and a split is kept only when the score is positive. Rows in the
//! missing bin are tried on both sides; the better side wins and becomes
//! the node's default direction for unseen missing values, preferring
//! left on a tie. Ties across candidates resolve to the lowest feature
//! code, then the lowest bin, which keeps the search order-independent.

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureCode;
use crate::tree::histogram::FeatureHistogram;

/// Structural floors a candidate split must clear on both children.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConstraints {
    pub min_leaf_rows: usize,
    pub min_child_hessian: f64,
}

impl Default for SplitConstraints {
    fn default() -> Self {
        SplitConstraints { min_leaf_rows: 10, min_child_hessian: 1e-3 }
    }
}

/// The winning candidate of one search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: FeatureCode,
    /// Left child takes bins `0..=bin` (values at or below the bin's cut).
    pub bin: u16,
    pub gain: f64,
    /// Where rows in the missing bin go.
    pub default_left: bool,
}

/// Regularized gain of a (left, right) partition; `gamma` is the split
/// penalty, already subtracted.
pub fn split_gain(g_l: f64, h_l: f64, g_r: f64, h_r: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(g_l, h_l) + score(g_r, h_r) - score(g_l + g_r, h_l + h_r)) - gamma
}

struct Side {
    g: f64,
    h: f64,
    count: usize,
}

/// Best positive-gain candidate over a set of feature histograms, or
/// `None` when every candidate fails the constraints or scores zero or
/// below. Histograms may have any bin layout as long as the last bin is
/// the missing bin.
pub fn best_split(
    hists: &[FeatureHistogram],
    lambda: f64,
    gamma: f64,
    constraints: &SplitConstraints,
) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;

    // scan in ascending feature code so ties resolve the same way no
    // matter which order the parties delivered their histograms
    let mut order: Vec<&FeatureHistogram> = hists.iter().collect();
    order.sort_by_key(|h| h.feature);

    for hist in order {
        let n_bins = hist.n_bins();
        if n_bins < 3 {
            // one value bin plus the missing bin: nothing to split
            continue;
        }
        let miss = n_bins - 1;
        let value_bins = miss;

        let total = Side {
            g: hist.g.iter().sum(),
            h: hist.h.iter().sum(),
            count: hist.counts.iter().sum(),
        };
        let missing = Side { g: hist.g[miss], h: hist.h[miss], count: hist.counts[miss] };

        // running prefix over value bins; boundary `bin` sends
        // bins 0..=bin left. The last boundary is value_bins-2: the final
        // value bin (overflow) must keep at least the right side.
        let mut left = Side { g: 0.0, h: 0.0, count: 0 };
        for bin in 0..value_bins - 1 {
            left.g += hist.g[bin];
            left.h += hist.h[bin];
            left.count += hist.counts[bin];

            for missing_goes_left in [true, false] {
                let (add_g, add_h, add_c) = if missing_goes_left {
                    (missing.g, missing.h, missing.count)
                } else {
                    (0.0, 0.0, 0)
                };
                let l = Side { g: left.g + add_g, h: left.h + add_h, count: left.count + add_c };
                let r = Side {
                    g: total.g - l.g,
                    h: total.h - l.h,
                    count: total.count - l.count,
                };
                if l.count < constraints.min_leaf_rows
                    || r.count < constraints.min_leaf_rows
                    || l.h < constraints.min_child_hessian
                    || r.h < constraints.min_child_hessian
                {
                    continue;
                }
                let gain = split_gain(l.g, l.h, r.g, r.h, lambda, gamma);
                if gain <= 0.0 {
                    continue;
                }
                // strict improvement only: earlier candidates win ties,
                // and the loop visits (feature asc, bin asc, left-first)
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        feature: hist.feature,
                        bin: bin as u16,
                        gain,
                        default_left: missing_goes_left,
                    });
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn loose() -> SplitConstraints {
        SplitConstraints { min_leaf_rows: 1, min_child_hessian: 0.0 }
    }

    fn hist(feature: u32, g: Vec<f64>, h: Vec<f64>, counts: Vec<usize>) -> FeatureHistogram {
        FeatureHistogram { feature: FeatureCode(feature), g, h, counts }
    }

    #[test]
    fn gain_hand_worked_value() {
        // 1/2 [ 4/4 + 1/3 - 1/6 ] = 7/12
        let gain = split_gain(-2.0, 3.0, 1.0, 2.0, 1.0, 0.0);
        assert!((gain - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_shifts_gain_down() {
        let base = split_gain(-2.0, 3.0, 1.0, 2.0, 1.0, 0.0);
        assert!((split_gain(-2.0, 3.0, 1.0, 2.0, 1.0, 0.25) - (base - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn uniform_gradients_offer_no_gain() {
        // identical mean gradient on both sides: splitting buys nothing
        let gain = split_gain(1.0, 1.0, 1.0, 1.0, 1.0, 0.0);
        assert!(gain <= 1e-15);
    }

    #[test]
    fn search_finds_the_separating_boundary() {
        // bins 0-1 pull negative, bins 2 pulls positive; boundary after
        // bin 1 separates them cleanly. Layout: 3 value bins + missing.
        let h = hist(
            0,
            vec![-1.0, -1.0, 2.0, 0.0],
            vec![0.5, 0.5, 0.5, 0.0],
            vec![4, 4, 4, 0],
        );
        let best = best_split(&[h], 1.0, 0.0, &loose()).unwrap();
        assert_eq!(best.feature, FeatureCode(0));
        assert_eq!(best.bin, 1);
        let expect = split_gain(-2.0, 1.0, 2.0, 0.5, 1.0, 0.0);
        assert!((best.gain - expect).abs() < 1e-15);
    }

    #[test]
    fn tie_breaks_prefer_lower_feature_regardless_of_input_order() {
        let a = hist(2, vec![-1.0, 1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0, 0.0], vec![2, 2, 0, 0]);
        let b = hist(5, vec![-1.0, 1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0, 0.0], vec![2, 2, 0, 0]);
        let best = best_split(&[b, a], 1.0, 0.0, &loose()).unwrap();
        assert_eq!(best.feature, FeatureCode(2));
    }

    #[test]
    fn missing_rows_choose_their_better_side() {
        // missing bin carries strong negative gradient matching the left
        let h = hist(
            0,
            vec![-2.0, 2.0, 0.0, -3.0],
            vec![1.0, 1.0, 0.5, 1.0],
            vec![3, 3, 1, 3],
        );
        let best = best_split(&[h], 1.0, 0.0, &loose()).unwrap();
        assert!(best.default_left);
        // and on a clean tie (empty missing bin) left is the default
        let h = hist(0, vec![-1.0, 1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0, 0.0], vec![2, 2, 0, 0]);
        let best = best_split(&[h], 1.0, 0.0, &loose()).unwrap();
        assert!(best.default_left);
    }

    #[test]
    fn constraints_rule_out_small_children() {
        let h = hist(0, vec![-1.0, 1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0, 0.0], vec![2, 2, 0, 0]);
        let tight = SplitConstraints { min_leaf_rows: 3, min_child_hessian: 0.0 };
        assert!(best_split(std::slice::from_ref(&h), 1.0, 0.0, &tight).is_none());
        let hess = SplitConstraints { min_leaf_rows: 1, min_child_hessian: 0.6 };
        assert!(best_split(&[h], 1.0, 0.0, &hess).is_none());
    }

    #[test]
    fn heavy_gamma_suppresses_all_splits() {
        let h = hist(0, vec![-1.0, 1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0, 0.0], vec![2, 2, 0, 0]);
        assert!(best_split(&[h], 1.0, 10.0, &loose()).is_none());
    }

    #[test]
    fn single_value_bin_features_are_unsplittable() {
        let h = hist(0, vec![1.0, 0.0], vec![0.5, 0.0], vec![4, 0]);
        assert!(best_split(&[h], 1.0, 0.0, &loose()).is_none());
    }

    /// Exhaustive reference search: enumerate every (feature, boundary,
    /// missing side) directly and keep the best under the same tie rules.
    fn brute_force(
        hists: &[FeatureHistogram],
        lambda: f64,
        gamma: f64,
        c: &SplitConstraints,
    ) -> Option<SplitCandidate> {
        let mut best: Option<SplitCandidate> = None;
        for hist in hists {
            let miss = hist.n_bins() - 1;
            for bin in 0..miss.saturating_sub(1) {
                for missing_left in [true, false] {
                    let mut l = (0.0, 0.0, 0usize);
                    let mut r = (0.0, 0.0, 0usize);
                    for b in 0..hist.n_bins() {
                        let goes_left =
                            if b == miss { missing_left } else { b <= bin };
                        let side = if goes_left { &mut l } else { &mut r };
                        side.0 += hist.g[b];
                        side.1 += hist.h[b];
                        side.2 += hist.counts[b];
                    }
                    if l.2 < c.min_leaf_rows
                        || r.2 < c.min_leaf_rows
                        || l.1 < c.min_child_hessian
                        || r.1 < c.min_child_hessian
                    {
                        continue;
                    }
                    let gain = split_gain(l.0, l.1, r.0, r.1, lambda, gamma);
                    if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                        best = Some(SplitCandidate {
                            feature: hist.feature,
                            bin: bin as u16,
                            gain,
                            default_left: missing_left,
                        });
                    }
                }
            }
        }
        best
    }

    #[test]
    fn search_matches_exhaustive_reference() {
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        for trial in 0..300 {
            let n_feats = rng.gen_range(1..=4);
            let hists: Vec<FeatureHistogram> = (0..n_feats)
                .map(|f| {
                    let bins = rng.gen_range(2..=8);
                    let counts: Vec<usize> = (0..bins).map(|_| rng.gen_range(0..6)).collect();
                    hist(
                        f,
                        counts.iter().map(|&c| rng.gen_range(-1.0..1.0) * c as f64).collect(),
                        counts.iter().map(|&c| rng.gen_range(0.0..0.25) * c as f64).collect(),
                        counts,
                    )
                })
                .collect();
            let c = SplitConstraints {
                min_leaf_rows: rng.gen_range(1..=3),
                min_child_hessian: 0.0,
            };
            let fast = best_split(&hists, 1.0, 0.01, &c);
            let slow = brute_force(&hists, 1.0, 0.01, &c);
            match (fast, slow) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert!((a.gain - b.gain).abs() <= 1e-12, "trial {trial}");
                    assert_eq!(a.feature, b.feature, "trial {trial}");
                    assert_eq!(a.bin, b.bin, "trial {trial}");
                    assert_eq!(a.default_left, b.default_left, "trial {trial}");
                }
                (a, b) => panic!("trial {trial}: {a:?} vs {b:?}"),
            }
        }
    }
}
