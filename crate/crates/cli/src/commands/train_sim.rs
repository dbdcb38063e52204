//! Simulation training runs: one stats file per seed plus a run-level
//! summary document consumed by `compare`.
//!
//! Each stats file holds a header line (the only line carrying a
//! timestamp), one record per step, and a closing summary record; bodies
//! are byte-identical across reruns with the same config and seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tarpo_core::sim::{generate_tasks, train, TaskSet, TrainSummary};

use crate::config::ResolvedConfig;
use crate::error::CliError;
use crate::io::{unix_timestamp, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    #[serde(flatten)]
    pub summary: TrainSummary,
}

/// Cross-seed means of the per-seed summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: usize,
    pub mean_val_acc: f64,
    pub mean_val_region_reward: f64,
    pub mean_val_len: f64,
    pub mean_train_len: f64,
    pub mean_train_reward: f64,
}

/// The `summary.json` document written next to the per-seed stats files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummaryFile {
    pub config: ResolvedConfig,
    pub per_seed: Vec<SeedSummary>,
    pub aggregate: Aggregate,
}

pub fn default_out_dir(config: &ResolvedConfig) -> PathBuf {
    PathBuf::from("runs").join(config.train.algorithm.label())
}

pub fn run(config: &ResolvedConfig, out_dir: &Path) -> Result<(), CliError> {
    let tasks = generate_tasks(
        config.tasks.seed,
        config.tasks.count,
        &config.tasks.shape(),
    );
    let task_set = TaskSet::split_nine_to_one(tasks);

    let mut per_seed = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let outcome = train(&config.train, &task_set, seed)?;

        let header = serde_json::json!({
            "record": "header",
            "created_unix": unix_timestamp(),
            "command": "train-sim",
            "seed": seed,
            "config": config,
        });
        let mut lines = Vec::with_capacity(outcome.stats.steps.len() + 2);
        lines.push(header.to_string());
        for step in &outcome.stats.steps {
            lines.push(serde_json::to_string(step).expect("step records serialize"));
        }
        let mut summary_line = serde_json::to_value(&outcome.stats.summary)
            .expect("summaries serialize");
        summary_line["record"] = "summary".into();
        lines.push(summary_line.to_string());

        let path = out_dir.join(format!("seed_{seed}.jsonl"));
        write_atomic(&path, &(lines.join("\n") + "\n"))?;

        let summary = outcome.stats.summary;
        println!(
            "seed {seed}: val_acc {:.4}  val_region_reward {:.4}  val_len {:.1}  train_len {:.1}",
            summary.val_acc, summary.val_region_reward, summary.val_mean_len,
            summary.train_mean_len,
        );
        per_seed.push(SeedSummary { seed, summary });
    }

    let n = per_seed.len() as f64;
    let aggregate = Aggregate {
        seeds: per_seed.len(),
        mean_val_acc: per_seed.iter().map(|s| s.summary.val_acc).sum::<f64>() / n,
        mean_val_region_reward: per_seed
            .iter()
            .map(|s| s.summary.val_region_reward)
            .sum::<f64>()
            / n,
        mean_val_len: per_seed.iter().map(|s| s.summary.val_mean_len).sum::<f64>() / n,
        mean_train_len: per_seed
            .iter()
            .map(|s| s.summary.train_mean_len)
            .sum::<f64>()
            / n,
        mean_train_reward: per_seed
            .iter()
            .map(|s| s.summary.train_mean_reward)
            .sum::<f64>()
            / n,
    };
    println!(
        "{} over {} seed(s): mean val_acc {:.4}  mean train_len {:.2}",
        config.train.algorithm.label(),
        per_seed.len(),
        aggregate.mean_val_acc,
        aggregate.mean_train_len,
    );

    let summary_file = RunSummaryFile {
        config: config.clone(),
        per_seed,
        aggregate,
    };
    write_atomic(
        &out_dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summary_file).expect("summary file serializes") + "\n"),
    )
}
