//! Closed-form runtime estimation for federated forest training.
//!
//! The model prices one tree over the full dataset at `unit_time` and
//! scales it by the round's sample fraction and feature fraction. A run
//! is a fixed overhead (key generation, id alignment) plus the per-round
//! tree costs; bounds come from the two extremes of intra-round
//! parallelism:
//!
//! * lower bound — every tree of a round runs concurrently, so a round
//!   costs one discounted tree;
//! * upper bound — trees run back to back, so a round costs its tree
//!   count times the discounted tree.
//!
//! A dynamic single-machine forest with one worker per tree matches the
//! lower bound by construction, which pins it inside the bracket.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-round cost factors, usually read off the parameter schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundLoad {
    /// Row-sample fraction of the round.
    pub sample_fraction: f64,
    /// Feature-sample fraction of the round.
    pub feature_fraction: f64,
    /// Trees trained in the round.
    pub trees: usize,
}

/// Inputs to the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeModel {
    /// Wall time of one tree over the full dataset, any unit.
    pub unit_time: f64,
    /// One-off setup cost in the same unit.
    pub fixed_overhead: f64,
    pub rounds: Vec<RoundLoad>,
}

/// The estimator's output bracket, in the unit of [`RuntimeModel::unit_time`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeEstimate {
    /// All trees of a round in parallel.
    pub lower: f64,
    /// All trees of a round sequential.
    pub upper: f64,
    /// Dynamic forest on one machine with per-tree workers; equals
    /// `lower` under this model.
    pub single_machine: f64,
}

/// Cost of one tree trained on `sample_fraction` of the rows and
/// `feature_fraction` of the columns.
pub fn single_tree_time(sample_fraction: f64, feature_fraction: f64, unit_time: f64) -> f64 {
    sample_fraction * feature_fraction * unit_time
}

/// Evaluate the bracket for a run description.
pub fn estimate_runtime(model: &RuntimeModel) -> Result<RuntimeEstimate> {
    if model.unit_time.is_nan() || model.unit_time <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "unit_time must be positive, got {}",
            model.unit_time
        )));
    }
    if model.fixed_overhead < 0.0 {
        return Err(Error::InvalidConfig("fixed_overhead must be non-negative".into()));
    }
    if model.rounds.is_empty() {
        return Err(Error::InvalidConfig("runtime model needs at least one round".into()));
    }
    for (i, r) in model.rounds.iter().enumerate() {
        let ok = (0.0..=1.0).contains(&r.sample_fraction)
            && (0.0..=1.0).contains(&r.feature_fraction)
            && r.trees >= 1;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "round {}: fractions must lie in [0,1] and trees >= 1",
                i + 1
            )));
        }
    }

    let mut lower = model.fixed_overhead;
    let mut upper = model.fixed_overhead;
    for r in &model.rounds {
        let tree = single_tree_time(r.sample_fraction, r.feature_fraction, model.unit_time);
        lower += tree;
        upper += tree * r.trees as f64;
    }
    Ok(RuntimeEstimate { lower, upper, single_machine: lower })
}

/// Relative deviation of an estimate from the measured value:
/// `|1 - estimate / real|`.
pub fn error_rate(estimate: f64, real: f64) -> Result<f64> {
    if real.is_nan() || real <= 0.0 {
        return Err(Error::NonPositiveReference(real));
    }
    Ok((1.0 - estimate / real).abs())
}

/// Training-cost ratio of a subsampled forest relative to a full forest
/// of the same size: `alpha + log2(alpha) / log2(n)` for `n` samples and
/// sample fraction `alpha`.
///
/// For small `n` the negative log term can dominate and push the ratio
/// below zero; see [`complexity_ratio_limit`] for the asymptote.
pub fn complexity_ratio(n: usize, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need n >= 2 samples, got {n}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0,1], got {alpha}")));
    }
    Ok(alpha + alpha.log2() / (n as f64).log2())
}

/// Limit of [`complexity_ratio`] as the sample count grows: the log term
/// vanishes and the ratio tends to `alpha`.
pub fn complexity_ratio_limit(alpha: f64) -> f64 {
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_round_model() -> RuntimeModel {
        RuntimeModel {
            unit_time: 100.0,
            fixed_overhead: 10.0,
            rounds: vec![
                RoundLoad { sample_fraction: 0.1, feature_fraction: 1.0, trees: 5 },
                RoundLoad { sample_fraction: 0.2, feature_fraction: 1.0, trees: 4 },
            ],
        }
    }

    #[test]
    fn bracket_on_worked_example() {
        // lower: 10 + (0.1 + 0.2) * 100 = 40
        // upper: 10 + (0.1*5 + 0.2*4) * 100 = 140
        let est = estimate_runtime(&two_round_model()).unwrap();
        assert!((est.lower - 40.0).abs() < 1e-12);
        assert!((est.upper - 140.0).abs() < 1e-12);
        assert_eq!(est.single_machine, est.lower);
    }

    #[test]
    fn bracket_ordering_always_holds() {
        let est = estimate_runtime(&two_round_model()).unwrap();
        assert!(est.lower <= est.single_machine && est.single_machine <= est.upper);
    }

    #[test]
    fn single_tree_rounds_collapse_the_bracket() {
        let model = RuntimeModel {
            unit_time: 50.0,
            fixed_overhead: 0.0,
            rounds: vec![RoundLoad { sample_fraction: 1.0, feature_fraction: 1.0, trees: 1 }],
        };
        let est = estimate_runtime(&model).unwrap();
        assert_eq!(est.lower, est.upper);
        assert_eq!(est.lower, 50.0);
    }

    #[test]
    fn error_rate_known_values() {
        // measured pairs (estimate, real) -> percent deviation
        let cases = [
            (12656.0, 13818.0, 8.41),
            (31198.0, 32990.0, 5.43),
            (2658.0, 2940.0, 9.59),
            (6501.0, 6888.0, 5.62),
        ];
        for (est, real, pct) in cases {
            let got = error_rate(est, real).unwrap() * 100.0;
            assert!((got - pct).abs() <= 0.01, "({est},{real}): {got:.4} vs {pct}");
        }
    }

    #[test]
    fn error_rate_is_symmetric_around_exact() {
        assert_eq!(error_rate(100.0, 100.0).unwrap(), 0.0);
        assert!((error_rate(150.0, 100.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn error_rate_rejects_non_positive_reference() {
        assert!(matches!(error_rate(1.0, 0.0), Err(Error::NonPositiveReference(_))));
        assert!(matches!(error_rate(1.0, -3.0), Err(Error::NonPositiveReference(_))));
    }

    #[test]
    fn complexity_ratio_fixed_point() {
        // alpha = 0.1, n = 150_000: log2(0.1)/log2(150000) = -0.19319..,
        // so the ratio sits just below zero
        let r = complexity_ratio(150_000, 0.1).unwrap();
        assert!((r - (-0.0932)).abs() < 5e-5, "got {r}");
        assert!(r < 0.0);
    }

    #[test]
    fn complexity_ratio_approaches_alpha() {
        let alpha = 0.1;
        let mut prev_gap = f64::INFINITY;
        for n in [1_000, 1_000_000, 1_000_000_000] {
            let gap = (complexity_ratio(n, alpha).unwrap() - complexity_ratio_limit(alpha)).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 0.12);
    }

    #[test]
    fn full_sampling_has_unit_ratio() {
        // alpha = 1: the log term is zero at every n
        assert_eq!(complexity_ratio(1000, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn invalid_model_inputs_error() {
        let mut m = two_round_model();
        m.unit_time = 0.0;
        assert!(estimate_runtime(&m).is_err());
        let mut m = two_round_model();
        m.rounds[0].trees = 0;
        assert!(estimate_runtime(&m).is_err());
        let mut m = two_round_model();
        m.rounds.clear();
        assert!(estimate_runtime(&m).is_err());
        assert!(complexity_ratio(1, 0.5).is_err());
        assert!(complexity_ratio(100, 0.0).is_err());
    }
}
