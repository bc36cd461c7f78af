//! End-to-end experiment harness: load, split, partition vertically,
//! train the scheduled forest and the one-tree baseline over the message
//! protocol, evaluate per round, and write the run directory.
//!
//! A run directory holds `run.toml` (config echo, including seeds),
//! `metrics.csv` (per run/split/round AUC, accuracy, F1, cumulative train
//! time), `dynamic.model.json` / `baseline.model.json`, `transcript.log`
//! (+ the baseline's), and `estimate.txt` (runtime bracket vs. actual).

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::bench::config::ExperimentConfig;
use crate::bench::metrics::classification_report;
use crate::bench::runtime::{error_rate, estimate_runtime, RoundLoad, RuntimeEstimate, RuntimeModel};
use crate::dataset::{load_csv, partition_vertically, RawTable};
use crate::engine::federated::FederatedContext;
use crate::engine::{train, BoostContext, TrainConfig};
use crate::error::{Error, Result};
use crate::protocol::AuditReport;
use crate::scheduler::ScheduleSpec;
use crate::tree::grad::sigmoid;
use crate::tree::model::ResolvedModel;

/// Seeded shuffle split: `(train_rows, test_rows)`, both ascending.
pub fn train_test_split(
    n_rows: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if test_fraction.is_nan() || test_fraction <= 0.0 || test_fraction >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if n_rows < 2 {
        return Err(Error::EmptySample("train/test split"));
    }
    let n_test = ((n_rows as f64 * test_fraction).round() as usize).clamp(1, n_rows - 1);

    let mut rows: Vec<usize> = (0..n_rows).collect();
    rows.shuffle(&mut ChaCha12Rng::seed_from_u64(seed));
    let mut test = rows.split_off(n_rows - n_test);
    rows.sort_unstable();
    test.sort_unstable();
    Ok((rows, test))
}

/// Margins of every row after each round, i.e. the model's whole
/// training trajectory replayed on `columns[code][row]`.
pub fn round_margins(model: &ResolvedModel, columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = columns.first().map_or(0, Vec::len);
    let mut margins = vec![model.base_margin; rows];
    let mut per_round = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        for (r, m) in margins.iter_mut().enumerate() {
            *m += model.learning_rate * layer.evaluate(&|f| columns[f.0 as usize][r]);
        }
        per_round.push(margins.clone());
    }
    per_round
}

/// One `metrics.csv` line.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub run: String,
    pub split: String,
    pub round: u32,
    pub auc: f64,
    pub accuracy: f64,
    pub f1: f64,
    /// Training wall time up to this round, seconds; pairs with `auc`
    /// for quality-versus-time curves.
    pub cum_train_secs: f64,
}

/// One trained model with its evaluation trail.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub name: String,
    pub model: ResolvedModel,
    pub rows: Vec<MetricRow>,
    pub train_secs: f64,
    pub loads: Vec<RoundLoad>,
    pub audit: AuditReport,
}

impl RunResult {
    /// Final test-split metrics row.
    pub fn final_test(&self) -> &MetricRow {
        self.rows.iter().rev().find(|r| r.split == "test").expect("test rows always emitted")
    }
}

/// Runtime-model outputs for the dynamic run.
#[derive(Debug, Clone, Copy)]
pub struct RuntimeReport {
    pub unit_time: f64,
    /// Whether `unit_time` came from the probe run instead of config.
    pub measured: bool,
    pub fixed_overhead: f64,
    pub estimate: RuntimeEstimate,
    pub actual_secs: f64,
    pub error_lower: f64,
    pub error_upper: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub dynamic: RunResult,
    pub baseline: RunResult,
    pub runtime: RuntimeReport,
    pub out_dir: PathBuf,
}

fn columns_of(table: &RawTable) -> Vec<Vec<f64>> {
    table.features.iter().map(|f| f.values.clone()).collect()
}

fn labeled(table: &RawTable) -> Result<&[f64]> {
    table
        .labels
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("dataset has no label column".into()))
}

fn metric_rows(
    name: &str,
    split: &str,
    model: &ResolvedModel,
    table: &RawTable,
    cum_secs: &[f64],
) -> Result<Vec<MetricRow>> {
    let labels = labeled(table)?;
    let columns = columns_of(table);
    let mut rows = Vec::with_capacity(model.layers.len());
    for (i, margins) in round_margins(model, &columns).iter().enumerate() {
        let probs: Vec<f64> = margins.iter().map(|&m| sigmoid(m)).collect();
        let report = classification_report(labels, &probs)?;
        rows.push(MetricRow {
            run: name.to_string(),
            split: split.to_string(),
            round: i as u32 + 1,
            auc: report.auc,
            accuracy: report.accuracy,
            f1: report.f1,
            cum_train_secs: cum_secs[i],
        });
    }
    Ok(rows)
}

fn run_one(
    name: &str,
    config: &ExperimentConfig,
    train_cfg: &TrainConfig,
    train_table: &RawTable,
    test_table: &RawTable,
    out_dir: &Path,
) -> Result<RunResult> {
    let parties = partition_vertically(train_table, &config.dataset.partition)?;
    let mut ctx = FederatedContext::new(
        parties,
        config.crypto.backend(),
        config.crypto.codec(),
        train_cfg.n_bins,
        train_cfg.seed,
    )?;

    let started = Instant::now();
    let outcome = train(&mut ctx, train_cfg)?;
    let train_secs = started.elapsed().as_secs_f64();
    let model = ctx.resolve(&outcome.model)?;

    let cum_secs: Vec<f64> = outcome
        .round_secs
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s;
            Some(*acc)
        })
        .collect();
    let mut rows = metric_rows(name, "train", &model, train_table, &cum_secs)?;
    rows.extend(metric_rows(name, "test", &model, test_table, &cum_secs)?);

    model.save(out_dir.join(format!("{name}.model.json")))?;
    let transcript_name =
        if name == "dynamic" { "transcript.log".into() } else { format!("{name}.transcript.log") };
    ctx.federation().transcript().save(out_dir.join(transcript_name))?;

    Ok(RunResult {
        name: name.to_string(),
        model,
        rows,
        train_secs,
        loads: outcome
            .round_loads
            .iter()
            .map(|&(trees, sample_fraction, feature_fraction)| RoundLoad {
                sample_fraction,
                feature_fraction,
                trees,
            })
            .collect(),
        audit: ctx.federation().transcript().audit(),
    })
}

/// Time one full-data tree in the same protocol setup; the self-measured
/// `unit_time` for the runtime bracket.
fn measure_unit_time(config: &ExperimentConfig, train_table: &RawTable) -> Result<f64> {
    let mut probe_cfg = config.train.train_config()?;
    probe_cfg.rounds = 1;
    probe_cfg.trees_per_layer = ScheduleSpec::constant(1.0);
    probe_cfg.row_rate = ScheduleSpec::constant(1.0);
    probe_cfg.feature_rate = ScheduleSpec::constant(1.0);

    let parties = partition_vertically(train_table, &config.dataset.partition)?;
    let mut ctx = FederatedContext::new(
        parties,
        config.crypto.backend(),
        config.crypto.codec(),
        probe_cfg.n_bins,
        probe_cfg.seed,
    )?;
    let outcome = train(&mut ctx, &probe_cfg)?;
    Ok(outcome.round_secs[0].max(1e-9))
}

fn write_metrics_csv(path: &Path, runs: [&RunResult; 2]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot write metrics: {e}")))?;
    for run in runs {
        for row in &run.rows {
            writer
                .serialize(row)
                .map_err(|e| Error::InvalidConfig(format!("cannot write metrics: {e}")))?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn write_estimate(path: &Path, rounds: usize, report: &RuntimeReport) -> Result<()> {
    let source = if report.measured { "measured by one-tree probe" } else { "from config" };
    let text = format!(
        "# runtime bracket, seconds\n\
         unit_time = {:.6}  # {source}\n\
         fixed_overhead = {:.6}\n\
         rounds = {rounds}\n\
         lower = {:.6}\n\
         upper = {:.6}\n\
         single_machine = {:.6}\n\
         actual = {:.6}\n\
         error_rate_lower = {:.6}\n\
         error_rate_upper = {:.6}\n",
        report.unit_time,
        report.fixed_overhead,
        report.estimate.lower,
        report.estimate.upper,
        report.estimate.single_machine,
        report.actual_secs,
        report.error_lower,
        report.error_upper,
    );
    std::fs::write(path, text)?;
    Ok(())
}

/// Run the whole experiment on an already-loaded table.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    table: &RawTable,
    out_dir: &Path,
) -> Result<ExperimentReport> {
    config.validate()?;
    labeled(table)?;
    std::fs::create_dir_all(out_dir)?;

    let (train_rows, test_rows) =
        train_test_split(table.n_rows(), config.split.test_fraction, config.split.seed)?;
    let train_table = table.select_rows(&train_rows)?;
    let test_table = table.select_rows(&test_rows)?;

    let dynamic_cfg = config.train.train_config()?;
    let baseline_cfg = config.train.baseline_config()?;
    let dynamic = run_one("dynamic", config, &dynamic_cfg, &train_table, &test_table, out_dir)?;
    let baseline = run_one("baseline", config, &baseline_cfg, &train_table, &test_table, out_dir)?;

    let (unit_time, measured) = match config.runtime.unit_time {
        Some(t) => (t, false),
        None => (measure_unit_time(config, &train_table)?, true),
    };
    let estimate = estimate_runtime(&RuntimeModel {
        unit_time,
        fixed_overhead: config.runtime.fixed_overhead,
        rounds: dynamic.loads.clone(),
    })?;
    let runtime = RuntimeReport {
        unit_time,
        measured,
        fixed_overhead: config.runtime.fixed_overhead,
        estimate,
        actual_secs: dynamic.train_secs,
        error_lower: error_rate(estimate.lower, dynamic.train_secs)?,
        error_upper: error_rate(estimate.upper, dynamic.train_secs)?,
    };

    write_metrics_csv(&out_dir.join("metrics.csv"), [&dynamic, &baseline])?;
    write_estimate(&out_dir.join("estimate.txt"), dynamic.loads.len(), &runtime)?;
    config.save(out_dir.join("run.toml"))?;

    Ok(ExperimentReport { dynamic, baseline, runtime, out_dir: out_dir.to_path_buf() })
}

/// Load the configured CSV and run the whole experiment.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    let table = load_csv(&config.dataset.path, &config.dataset.schema())?;
    run_experiment_on(config, &table, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::{
        CryptoConfig, DatasetConfig, RuntimeSection, ScheduleConfig, SplitConfig, TrainSection,
    };
    use crate::bench::synth::{generate, SynthSpec};
    use crate::engine::centralized::CentralizedContext;

    fn test_config(partition: Vec<usize>, rounds: u32) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetConfig {
                path: "unused.csv".into(),
                id_column: Some("id".into()),
                label_column: Some("label".into()),
                partition,
            },
            split: SplitConfig { test_fraction: 0.3, seed: 42 },
            crypto: CryptoConfig::default(),
            train: TrainSection {
                rounds,
                learning_rate: 0.1,
                lambda: 1.0,
                gamma: 0.0,
                max_depth: 3,
                bins: 16,
                min_leaf_rows: 5,
                min_child_hessian: 1e-3,
                seed: 17,
                trees: ScheduleConfig {
                    direction: crate::bench::config::Direction::Decay,
                    min: 1.0,
                    max: Some(2.0),
                    k: 1.0,
                },
                sample_rate: ScheduleConfig::constant(0.8),
                feature_rate: ScheduleConfig::constant(1.0),
            },
            runtime: RuntimeSection::default(),
        }
    }

    #[test]
    fn split_is_seeded_disjoint_and_sized() {
        let (train, test) = train_test_split(10, 0.3, 7).unwrap();
        assert_eq!(test.len(), 3);
        assert_eq!(train.len(), 7);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());

        let again = train_test_split(10, 0.3, 7).unwrap();
        assert_eq!((train.clone(), test.clone()), again);
        let other = train_test_split(10, 0.3, 8).unwrap();
        assert_ne!((train, test), other);

        assert!(train_test_split(10, 0.0, 7).is_err());
        assert!(train_test_split(10, 1.0, 7).is_err());
        assert!(train_test_split(1, 0.3, 7).is_err());
    }

    #[test]
    fn round_margins_end_at_the_full_model_margin() {
        let table = generate(&SynthSpec { rows: 150, features: 4, missing_rate: 0.0, seed: 9 });
        let mut ctx = CentralizedContext::from_table(&table, 16).unwrap();
        let config = TrainConfig { rounds: 3, ..TrainConfig::default() };
        let outcome = train(&mut ctx, &config).unwrap();
        let model = ctx.resolve(&outcome.model).unwrap();

        let columns: Vec<Vec<f64>> = table.features.iter().map(|f| f.values.clone()).collect();
        let per_round = round_margins(&model, &columns);
        assert_eq!(per_round.len(), 3);
        for (a, b) in per_round.last().unwrap().iter().zip(model.margin_batch(&columns)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn experiment_writes_the_run_directory() {
        let table = generate(&SynthSpec { rows: 240, features: 4, missing_rate: 0.02, seed: 5 });
        let config = test_config(vec![2, 2], 3);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");

        let report = run_experiment_on(&config, &table, &out).unwrap();

        for file in [
            "run.toml",
            "metrics.csv",
            "estimate.txt",
            "dynamic.model.json",
            "baseline.model.json",
            "transcript.log",
            "baseline.transcript.log",
        ] {
            assert!(out.join(file).is_file(), "missing {file}");
        }

        // 2 runs x 2 splits x 3 rounds
        assert_eq!(report.dynamic.rows.len() + report.baseline.rows.len(), 12);
        assert!(report.dynamic.audit.is_clean());
        assert!(report.baseline.audit.is_clean());
        let test_auc = report.dynamic.final_test().auc;
        assert!(test_auc > 0.5, "test AUC {test_auc} no better than chance");

        let est = report.runtime.estimate;
        assert!(est.lower <= est.upper);
        assert!(report.runtime.measured);

        let loaded = ResolvedModel::load(out.join("dynamic.model.json")).unwrap();
        assert_eq!(
            loaded.canonical_bytes().unwrap(),
            report.dynamic.model.canonical_bytes().unwrap()
        );

        let echoed = ExperimentConfig::load(out.join("run.toml")).unwrap();
        assert_eq!(echoed, config);
    }

    #[test]
    fn missing_dataset_fails_before_training() {
        let mut config = test_config(vec![2, 2], 3);
        config.dataset.path = "/nonexistent/never.csv".into();
        let dir = tempfile::tempdir().unwrap();
        let err = run_experiment(&config, dir.path()).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
