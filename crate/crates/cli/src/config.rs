//! Run configuration: a TOML file with `[reward]`, `[run]`, and `[tasks]`
//! sections, every field optional with the documented defaults. Unknown
//! keys are rejected. The fully resolved configuration is echoed into every
//! output header so runs are self-describing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tarpo_core::reward::RewardConfig;
use tarpo_core::sim::{Algorithm, TaskShape, TrainConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub reward: RewardConfig,
    pub run: RunSection,
    pub tasks: TaskSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub algorithm: Algorithm,
    pub alpha_fixed: f64,
    pub group_size: usize,
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub eval_every: u64,
    pub ema_decay: f64,
    pub init_scale: f64,
    pub base_response_length: usize,
    pub verbosity_answer_coupling: bool,
    pub seeds: Vec<u64>,
}

impl Default for RunSection {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunSection {
            algorithm: train.algorithm,
            alpha_fixed: train.alpha_fixed,
            group_size: train.group_size,
            steps: train.steps,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            eval_every: train.eval_every,
            ema_decay: train.ema_decay,
            init_scale: train.init_scale,
            base_response_length: train.base_response_length,
            verbosity_answer_coupling: train.verbosity_answer_coupling,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub count: usize,
    pub seed: u64,
    pub min_rows: usize,
    pub max_rows: usize,
    pub min_cols: usize,
    pub max_cols: usize,
}

impl Default for TaskSection {
    fn default() -> Self {
        let shape = TaskShape::default();
        TaskSection {
            count: 500,
            seed: 2024,
            min_rows: shape.min_rows,
            max_rows: shape.max_rows,
            min_cols: shape.min_cols,
            max_cols: shape.max_cols,
        }
    }
}

impl TaskSection {
    pub fn shape(&self) -> TaskShape {
        TaskShape {
            min_rows: self.min_rows,
            max_rows: self.max_rows,
            min_cols: self.min_cols,
            max_cols: self.max_cols,
        }
    }
}

/// Command-line overrides applied on top of the file config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub algorithm: Option<Algorithm>,
    pub seed: Option<u64>,
    pub alpha_fixed: Option<f64>,
}

/// The fully resolved run configuration, echoed into output headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub tasks: TaskSection,
}

/// Loads the config file (defaults when absent) and applies overrides.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<ResolvedConfig, CliError> {
    let file: FileConfig = match path {
        None => FileConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!(
                "{}: {e}",
                p.display()
            )))?
        }
    };
    resolve(file, overrides)
}

fn resolve(file: FileConfig, overrides: &Overrides) -> Result<ResolvedConfig, CliError> {
    let run = file.run;
    let train = TrainConfig {
        algorithm: overrides.algorithm.unwrap_or(run.algorithm),
        reward: file.reward,
        alpha_fixed: overrides.alpha_fixed.unwrap_or(run.alpha_fixed),
        group_size: run.group_size,
        steps: run.steps,
        batch_size: run.batch_size,
        learning_rate: run.learning_rate,
        eval_every: run.eval_every,
        ema_decay: run.ema_decay,
        init_scale: run.init_scale,
        base_response_length: run.base_response_length,
        verbosity_answer_coupling: run.verbosity_answer_coupling,
    };
    train
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let seeds = match overrides.seed {
        Some(seed) => vec![seed],
        None => run.seeds,
    };
    if seeds.is_empty() {
        return Err(CliError::Config("at least one seed is required".into()));
    }

    let tasks = file.tasks;
    if tasks.count == 0 {
        return Err(CliError::Config("tasks.count must be positive".into()));
    }
    tasks.shape().validate().map_err(CliError::Config)?;

    Ok(ResolvedConfig {
        train,
        seeds,
        tasks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let resolved = resolve(FileConfig::default(), &Overrides::default()).unwrap();
        assert_eq!(resolved.train.algorithm, Algorithm::Tarpo);
        assert_eq!(resolved.train.reward.gamma, 0.3);
        assert_eq!(resolved.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(resolved.tasks.count, 500);
    }

    #[test]
    fn toml_sections_parse() {
        let file: FileConfig = toml::from_str(
            r#"
            [reward]
            zeta = 0.5
            gamma = 0.25

            [run]
            algorithm = "grpo"
            steps = 10
            seeds = [7]

            [tasks]
            count = 20
            seed = 3
            "#,
        )
        .unwrap();
        let resolved = resolve(file, &Overrides::default()).unwrap();
        assert_eq!(resolved.train.algorithm, Algorithm::Grpo);
        assert_eq!(resolved.train.reward.zeta, 0.5);
        assert_eq!(resolved.train.steps, 10);
        assert_eq!(resolved.seeds, vec![7]);
        assert_eq!(resolved.tasks.count, 20);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<FileConfig>("[run]\nnot_a_key = 1\n").unwrap_err();
        assert!(err.to_string().contains("not_a_key"));
        assert!(toml::from_str::<FileConfig>("[nope]\nx = 1\n").is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let overrides = Overrides {
            algorithm: Some(Algorithm::TarpoFixed),
            seed: Some(42),
            alpha_fixed: Some(0.5),
        };
        let resolved = resolve(FileConfig::default(), &overrides).unwrap();
        assert_eq!(resolved.train.algorithm, Algorithm::TarpoFixed);
        assert_eq!(resolved.train.alpha_fixed, 0.5);
        assert_eq!(resolved.seeds, vec![42]);
    }

    #[test]
    fn invalid_hyperparameters_are_config_errors() {
        let file: FileConfig = toml::from_str("[reward]\ngamma = 2.0\n").unwrap();
        assert!(matches!(
            resolve(file, &Overrides::default()),
            Err(CliError::Config(_))
        ));
    }
}
