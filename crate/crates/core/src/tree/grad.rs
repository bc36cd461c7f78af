//! Logistic-loss derivatives and leaf weights.
//!
//! Boosting fits each layer to the first and second derivatives of the
//! loss at the current margin. For binary log-loss with prediction
//! `p = sigmoid(margin)` these are `g = p - y` and `h = p (1 - p)`; the
//! optimal leaf weight for a set of rows is `-G / (H + lambda)` over the
//! set's gradient sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// First and second loss derivatives of one row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradPair {
    pub g: f64,
    pub h: f64,
}

/// Derivatives of binary log-loss at `margin` for a {0,1} label.
pub fn logistic_grad(margin: f64, label: f64) -> GradPair {
    let p = sigmoid(margin);
    GradPair { g: p - label, h: p * (1.0 - p) }
}

/// Regularized optimal weight of a leaf holding gradient sums `(g_sum, h_sum)`.
pub fn leaf_weight(g_sum: f64, h_sum: f64, lambda: f64) -> Result<f64> {
    let denom = h_sum + lambda;
    if denom <= 0.0 || denom.is_nan() {
        return Err(Error::NonPositiveHessian(denom));
    }
    Ok(-g_sum / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn log_loss(margin: f64, y: f64) -> f64 {
        let p = sigmoid(margin);
        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
    }

    #[test]
    fn sigmoid_midpoint_and_symmetry() {
        assert_eq!(sigmoid(0.0), 0.5);
        for z in [0.1, 1.0, 5.0, 30.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_margin_gradients() {
        let gp = logistic_grad(0.0, 1.0);
        assert_eq!(gp.g, -0.5);
        assert_eq!(gp.h, 0.25);
        let gp = logistic_grad(0.0, 0.0);
        assert_eq!(gp.g, 0.5);
        assert_eq!(gp.h, 0.25);
    }

    #[test]
    fn confident_correct_predictions_have_vanishing_gradients() {
        let gp = logistic_grad(20.0, 1.0);
        assert!(gp.g.abs() < 1e-8);
        assert!(gp.h < 1e-8);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let eps = 1e-5;
        for _ in 0..200 {
            let m: f64 = rng.gen_range(-4.0..4.0);
            let y = f64::from(rng.gen_range(0..=1));
            let gp = logistic_grad(m, y);
            // g is the slope of the loss; h is the slope of g
            let num_g = (log_loss(m + eps, y) - log_loss(m - eps, y)) / (2.0 * eps);
            let num_h =
                (logistic_grad(m + eps, y).g - logistic_grad(m - eps, y).g) / (2.0 * eps);
            assert!((gp.g - num_g).abs() < 1e-7, "g {} vs {num_g}", gp.g);
            assert!((gp.h - num_h).abs() < 1e-8, "h {} vs {num_h}", gp.h);
        }
    }

    #[test]
    fn leaf_weight_moves_against_the_gradient() {
        // g_sum = -2 (under-predicted positives), lambda-damped pull upward
        assert_eq!(leaf_weight(-2.0, 3.0, 1.0).unwrap(), 0.5);
        assert_eq!(leaf_weight(2.0, 3.0, 1.0).unwrap(), -0.5);
        assert_eq!(leaf_weight(0.0, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn leaf_weight_rejects_non_positive_denominator() {
        assert!(matches!(leaf_weight(1.0, -2.0, 1.0), Err(Error::NonPositiveHessian(_))));
        assert!(matches!(leaf_weight(1.0, 0.0, 0.0), Err(Error::NonPositiveHessian(_))));
    }
}
