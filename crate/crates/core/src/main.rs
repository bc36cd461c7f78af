//! Command-line harness around the training, evaluation, scheduling,
//! runtime-estimation, and transcript-audit entry points.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fedgbf::bench::config::ExperimentConfig;
use fedgbf::bench::experiment::{run_experiment, train_test_split};
use fedgbf::bench::metrics::classification_report;
use fedgbf::bench::runtime::{error_rate, estimate_runtime, RoundLoad, RuntimeModel};
use fedgbf::bench::synth::{generate, write_csv, SynthSpec};
use fedgbf::dataset::load_csv;
use fedgbf::protocol::Transcript;
use fedgbf::scheduler::{schedule_count, schedule_value};
use fedgbf::tree::grad::sigmoid;
use fedgbf::tree::model::ResolvedModel;
use fedgbf::Result;

#[derive(Parser)]
#[command(name = "fedgbf", version, about = "Vertically federated gradient-boosting forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SplitName {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Train the scheduled forest and the one-tree baseline, writing a
    /// run directory with models, metrics, transcripts, and estimates.
    Train {
        /// Experiment TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Run directory to create.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Score a saved model on one side of the configured split.
    Evaluate {
        /// Experiment TOML file (dataset and split sections are used).
        #[arg(long)]
        config: PathBuf,
        /// Model JSON written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Which side of the split to score.
        #[arg(long, value_enum, default_value_t = SplitName::Test)]
        split: SplitName,
    },
    /// Print the per-round schedule table as CSV.
    SchedulePreview {
        /// Experiment TOML file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the runtime bracket for the configured schedules.
    EstimateRuntime {
        /// Experiment TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Seconds for one full-data tree; overrides the config value.
        #[arg(long)]
        unit_time: Option<f64>,
        /// One-off setup seconds; overrides the config value.
        #[arg(long)]
        fixed_overhead: Option<f64>,
        /// Known real runtime in seconds; prints error rates against it.
        #[arg(long)]
        actual: Option<f64>,
    },
    /// Check a message transcript for privacy violations; exits non-zero
    /// if any are found.
    Audit {
        /// transcript.log written by `train`.
        transcript: PathBuf,
    },
    /// Generate a synthetic binary-classification CSV.
    SynthData {
        #[arg(long, default_value_t = 2000)]
        rows: usize,
        #[arg(long, default_value_t = 10)]
        features: usize,
        /// Fraction of feature cells blanked out.
        #[arg(long, default_value_t = 0.02)]
        missing_rate: f64,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn cmd_train(config_path: &Path, out: &Path) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let report = run_experiment(&config, out)?;

    for run in [&report.dynamic, &report.baseline] {
        let last = run.final_test();
        println!(
            "{:<8}  rounds {:>3}  test auc {:.4}  acc {:.4}  f1 {:.4}  train {:.2}s",
            run.name, last.round, last.auc, last.accuracy, last.f1, run.train_secs
        );
        if !run.audit.is_clean() {
            println!("{:<8}  WARNING: {} transcript violations", run.name, run.audit.violations.len());
        }
    }
    let rt = &report.runtime;
    println!(
        "runtime bracket [{:.2}s, {:.2}s] vs actual {:.2}s (unit_time {:.4}s, {})",
        rt.estimate.lower,
        rt.estimate.upper,
        rt.actual_secs,
        rt.unit_time,
        if rt.measured { "measured" } else { "configured" },
    );
    println!("run directory: {}", report.out_dir.display());
    Ok(())
}

fn cmd_evaluate(config_path: &PathBuf, model_path: &PathBuf, split: SplitName) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let model = ResolvedModel::load(model_path)?;
    let table = load_csv(&config.dataset.path, &config.dataset.schema())?;
    let (train_rows, test_rows) =
        train_test_split(table.n_rows(), config.split.test_fraction, config.split.seed)?;
    let (name, part) = match split {
        SplitName::Train => ("train", table.select_rows(&train_rows)?),
        SplitName::Test => ("test", table.select_rows(&test_rows)?),
    };

    let labels = part
        .labels
        .clone()
        .ok_or_else(|| fedgbf::Error::InvalidConfig("dataset has no label column".into()))?;
    let columns: Vec<Vec<f64>> = part.features.iter().map(|f| f.values.clone()).collect();
    let probs: Vec<f64> =
        model.margin_batch(&columns).into_iter().map(sigmoid).collect();
    let report = classification_report(&labels, &probs)?;

    println!("split = {name}");
    println!("rows = {}", part.n_rows());
    println!("positives = {}", report.positives);
    println!("negatives = {}", report.negatives);
    println!("auc = {:.6}", report.auc);
    println!("accuracy = {:.6}", report.accuracy);
    println!("f1 = {:.6}", report.f1);
    Ok(())
}

fn cmd_schedule_preview(config_path: &PathBuf) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let rounds = config.train.rounds;
    let trees = config.train.trees.spec()?;
    let sample = config.train.sample_rate.spec()?;
    let feature = config.train.feature_rate.spec()?;

    println!("round,trees,sample_rate,feature_rate");
    for round in 1..=rounds {
        println!(
            "{round},{},{},{}",
            schedule_count(&trees, round, rounds)?,
            schedule_value(&sample, round, rounds)?,
            schedule_value(&feature, round, rounds)?,
        );
    }
    Ok(())
}

fn cmd_estimate_runtime(
    config_path: &PathBuf,
    unit_time: Option<f64>,
    fixed_overhead: Option<f64>,
    actual: Option<f64>,
) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let Some(unit_time) = unit_time.or(config.runtime.unit_time) else {
        return Err(fedgbf::Error::InvalidConfig(
            "no unit_time: pass --unit-time or set [runtime] unit_time (train measures one \
             automatically)"
                .into(),
        ));
    };
    let fixed_overhead = fixed_overhead.unwrap_or(config.runtime.fixed_overhead);

    let rounds = config.train.rounds;
    let trees = config.train.trees.spec()?;
    let sample = config.train.sample_rate.spec()?;
    let feature = config.train.feature_rate.spec()?;
    let mut loads = Vec::with_capacity(rounds as usize);
    for round in 1..=rounds {
        loads.push(RoundLoad {
            sample_fraction: schedule_value(&sample, round, rounds)?,
            feature_fraction: schedule_value(&feature, round, rounds)?,
            trees: schedule_count(&trees, round, rounds)?,
        });
    }
    let estimate = estimate_runtime(&RuntimeModel { unit_time, fixed_overhead, rounds: loads })?;

    println!("unit_time = {unit_time}");
    println!("fixed_overhead = {fixed_overhead}");
    println!("rounds = {rounds}");
    println!("lower = {:.6}", estimate.lower);
    println!("upper = {:.6}", estimate.upper);
    println!("single_machine = {:.6}", estimate.single_machine);
    if let Some(actual) = actual {
        println!("actual = {actual}");
        println!("error_rate_lower = {:.6}", error_rate(estimate.lower, actual)?);
        println!("error_rate_upper = {:.6}", error_rate(estimate.upper, actual)?);
    }
    Ok(())
}

fn cmd_audit(transcript_path: &PathBuf) -> Result<bool> {
    let transcript = Transcript::load(transcript_path)?;
    let report = transcript.audit();

    println!("messages = {}", report.total_messages);
    println!("bytes = {}", report.total_bytes);
    println!("violations = {}", report.violations.len());
    for v in &report.violations {
        let tags: Vec<String> = v.exposures.iter().map(|e| format!("{e:?}")).collect();
        println!(
            "  seq {} {} -> {} [{}]: {}",
            v.seq,
            v.sender,
            v.receiver,
            v.kind,
            tags.join(", ")
        );
    }
    Ok(report.is_clean())
}

fn cmd_synth_data(
    rows: usize,
    features: usize,
    missing_rate: f64,
    seed: u64,
    out: &PathBuf,
) -> Result<()> {
    let table = generate(&SynthSpec { rows, features, missing_rate, seed });
    write_csv(&table, out)?;
    println!("wrote {} rows x {} features to {}", rows, features, out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Train { config, out } => cmd_train(config, out).map(|()| true),
        Command::Evaluate { config, model, split } => {
            cmd_evaluate(config, model, *split).map(|()| true)
        }
        Command::SchedulePreview { config } => cmd_schedule_preview(config).map(|()| true),
        Command::EstimateRuntime { config, unit_time, fixed_overhead, actual } => {
            cmd_estimate_runtime(config, *unit_time, *fixed_overhead, *actual).map(|()| true)
        }
        Command::Audit { transcript } => cmd_audit(transcript),
        Command::SynthData { rows, features, missing_rate, seed, out } => {
            cmd_synth_data(*rows, *features, *missing_rate, *seed, out).map(|()| true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
