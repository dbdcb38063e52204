//! Side-by-side comparison of completed runs: validation accuracy, region
//! reward, and the response-length analog, with deltas against the first
//! run. Runs must share the same task generation (seed, count, shape) and
//! training seeds to be comparable.

use std::fs;
use std::path::{Path, PathBuf};

use crate::commands::train_sim::RunSummaryFile;
use crate::error::CliError;

fn summary_path(run: &Path) -> PathBuf {
    if run.is_dir() {
        run.join("summary.json")
    } else {
        run.to_path_buf()
    }
}

fn load_summary(run: &Path) -> Result<RunSummaryFile, CliError> {
    let path = summary_path(run);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::schema(&path, 1, e.to_string()))
}

pub fn run(runs: &[PathBuf]) -> Result<(), CliError> {
    let summaries: Vec<(String, RunSummaryFile)> = runs
        .iter()
        .map(|run| Ok((run.display().to_string(), load_summary(run)?)))
        .collect::<Result<_, CliError>>()?;

    let (base_name, base) = &summaries[0];
    for (name, summary) in &summaries[1..] {
        if summary.config.tasks != base.config.tasks {
            return Err(CliError::IncompatibleRuns(format!(
                "{name} and {base_name} use different task generation settings"
            )));
        }
        if summary.config.seeds != base.config.seeds {
            return Err(CliError::IncompatibleRuns(format!(
                "{name} and {base_name} use different training seeds"
            )));
        }
    }

    let width = summaries
        .iter()
        .map(|(name, _)| name.len())
        .max()
        .unwrap_or(0)
        .max("run".len());
    println!(
        "{:width$}  {:>11}  {:>8}  {:>13}  {:>9}",
        "run", "algorithm", "val_acc", "region_reward", "mean_len"
    );
    for (name, summary) in &summaries {
        println!(
            "{:width$}  {:>11}  {:>8.4}  {:>13.4}  {:>9.2}",
            name,
            summary.config.train.algorithm.label(),
            summary.aggregate.mean_val_acc,
            summary.aggregate.mean_val_region_reward,
            summary.aggregate.mean_train_len,
        );
    }
    for (name, summary) in &summaries[1..] {
        println!(
            "{:width$}  {:>11}  {:>+8.4}  {:>+13.4}  {:>+9.2}",
            format!("delta {name}"),
            "vs base",
            summary.aggregate.mean_val_acc - base.aggregate.mean_val_acc,
            summary.aggregate.mean_val_region_reward - base.aggregate.mean_val_region_reward,
            summary.aggregate.mean_train_len - base.aggregate.mean_train_len,
        );
    }
    Ok(())
}
