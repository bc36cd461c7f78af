//! Per-round parameter schedules.
//!
//! A schedule maps boosting round `b_t` in `1..=b_T` to a value between
//! `v_min` and `v_max` along a quarter period of a trig curve, then holds
//! the endpoint. The horizon factor `k` stretches (k > 1) or compresses
//! (k < 1) the moving phase: with k = 0.5 a decay bottoms out halfway
//! through training and stays at `v_min` for the remaining rounds.
//!
//! Schedules drive the per-round tree count and sample rates, trading
//! early-round capacity against late-round cost (or vice versa).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of change over rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleShape {
    /// Cosine from `v_max` down to `v_min`.
    Decay,
    /// Sine from `v_min` up to `v_max`.
    Growth,
    /// `v_max` every round.
    Constant,
}

/// A complete schedule description; validated by [`ScheduleSpec::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub shape: ScheduleShape,
    pub v_min: f64,
    pub v_max: f64,
    /// Horizon factor: the moving phase spans `k * (b_T - 1)` rounds.
    pub k: f64,
}

impl ScheduleSpec {
    pub fn constant(v: f64) -> Self {
        ScheduleSpec { shape: ScheduleShape::Constant, v_min: v, v_max: v, k: 1.0 }
    }

    pub fn decay(v_max: f64, v_min: f64, k: f64) -> Self {
        ScheduleSpec { shape: ScheduleShape::Decay, v_min, v_max, k }
    }

    pub fn growth(v_min: f64, v_max: f64, k: f64) -> Self {
        ScheduleSpec { shape: ScheduleShape::Growth, v_min, v_max, k }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.v_min.is_finite() || !self.v_max.is_finite() || !self.k.is_finite() {
            return Err(Error::InvalidSchedule("non-finite schedule parameter".into()));
        }
        if self.v_min > self.v_max {
            return Err(Error::InvalidSchedule(format!(
                "v_min {} exceeds v_max {}",
                self.v_min, self.v_max
            )));
        }
        if self.k <= 0.0 {
            return Err(Error::InvalidSchedule(format!("k must be positive, got {}", self.k)));
        }
        Ok(())
    }
}

/// Value of `spec` at round `b_t` (1-based) of a `b_t_total`-round run.
///
/// The moving phase covers rounds `1..=k*(b_T-1)+1`; beyond it the schedule
/// holds its final value. Endpoints are returned exactly, without trig
/// round-off.
pub fn schedule_value(spec: &ScheduleSpec, b_t: u32, b_t_total: u32) -> Result<f64> {
    spec.validate()?;
    if b_t_total == 0 || b_t == 0 || b_t > b_t_total {
        return Err(Error::ScheduleRoundOutOfRange { round: b_t, total: b_t_total });
    }
    if spec.shape == ScheduleShape::Constant {
        return Ok(spec.v_max);
    }
    // a single-round run never leaves the starting value
    if b_t_total == 1 {
        return Ok(match spec.shape {
            ScheduleShape::Decay => spec.v_max,
            ScheduleShape::Growth => spec.v_min,
            ScheduleShape::Constant => unreachable!(),
        });
    }

    let t = f64::from(b_t - 1);
    let span = spec.k * f64::from(b_t_total - 1);
    let range = spec.v_max - spec.v_min;

    match spec.shape {
        ScheduleShape::Decay => {
            if b_t == 1 {
                Ok(spec.v_max)
            } else if t >= span - 1e-9 {
                Ok(spec.v_min)
            } else {
                Ok(spec.v_min + range * (PI * t / (2.0 * span)).cos())
            }
        }
        ScheduleShape::Growth => {
            if b_t == 1 {
                Ok(spec.v_min)
            } else if t >= span - 1e-9 {
                Ok(spec.v_max)
            } else {
                Ok(spec.v_min + range * (PI * t / (2.0 * span)).sin())
            }
        }
        ScheduleShape::Constant => unreachable!(),
    }
}

/// [`schedule_value`] rounded to the nearest positive integer, for
/// count-valued schedules (trees per layer).
pub fn schedule_count(spec: &ScheduleSpec, b_t: u32, b_t_total: u32) -> Result<usize> {
    let v = schedule_value(spec, b_t, b_t_total)?;
    let n = v.round();
    if n < 1.0 {
        return Err(Error::InvalidSchedule(format!(
            "count schedule produced {n} at round {b_t}; counts must be >= 1"
        )));
    }
    Ok(n as usize)
}

/// The full value table of a schedule, one entry per round.
pub fn schedule_table(spec: &ScheduleSpec, b_t_total: u32) -> Result<Vec<f64>> {
    (1..=b_t_total).map(|b_t| schedule_value(spec, b_t, b_t_total)).collect()
}
