//! Deterministic synthetic classification data.
//!
//! Gaussian features, a random linear model with one interaction term,
//! and Bernoulli labels through the sigmoid. The same spec and seed always
//! produce the same table, so experiments and equivalence checks can run
//! without shipping real data.

use std::io::Write;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{RawColumn, RawTable};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub rows: usize,
    pub features: usize,
    /// Probability that any one cell is blanked out to NaN.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { rows: 2000, features: 10, missing_rate: 0.02, seed: 17 }
    }
}

fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    // Box-Muller; u1 is kept away from zero so the log stays finite
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Generate a labeled table according to `spec`.
pub fn generate(spec: &SynthSpec) -> RawTable {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let d = spec.features.max(1);

    let weights: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(spec.rows); d];
    let mut labels = Vec::with_capacity(spec.rows);
    for _ in 0..spec.rows {
        let x: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let mut margin: f64 = x.iter().zip(&weights).map(|(xi, wi)| xi * wi).sum();
        if d >= 2 {
            margin += 0.5 * x[0] * x[1];
        }
        let y = if rng.gen_range(0.0..1.0) < sigmoid(1.5 * margin) { 1.0 } else { 0.0 };
        labels.push(y);
        for (j, &v) in x.iter().enumerate() {
            let cell = if rng.gen_range(0.0..1.0) < spec.missing_rate { f64::NAN } else { v };
            columns[j].push(cell);
        }
    }

    RawTable {
        sample_ids: (0..spec.rows as u64).collect(),
        features: columns
            .into_iter()
            .enumerate()
            .map(|(j, values)| RawColumn { name: format!("x{j}"), values })
            .collect(),
        labels: Some(labels),
        label_name: Some("label".into()),
    }
}

/// Write a labeled table as CSV with an `id` column, ready for training.
pub fn write_csv<P: AsRef<Path>>(table: &RawTable, path: P) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "id")?;
    for f in &table.features {
        write!(out, ",{}", f.name)?;
    }
    writeln!(out, ",{}", table.label_name.as_deref().unwrap_or("label"))?;
    let labels = table.labels.as_deref().unwrap_or(&[]);
    for (i, &id) in table.sample_ids.iter().enumerate() {
        write!(out, "{id}")?;
        for f in &table.features {
            let v = f.values[i];
            if v.is_nan() {
                write!(out, ",")?;
            } else {
                write!(out, ",{v}")?;
            }
        }
        match labels.get(i) {
            Some(&y) => writeln!(out, ",{y}")?,
            None => writeln!(out)?,
        }
    }
    out.flush()?;
    Ok(())
}
