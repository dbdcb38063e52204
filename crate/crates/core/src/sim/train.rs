//! The training loop: group sampling, rewards, advantages, the surrogate
//! objective, and analytic gradient ascent, with per-step statistics.
//!
//! Three arms share one code path and differ only in the region weight and
//! penalty strength: GRPO forces `alpha = 0` and disables the penalty,
//! fixed-weight TARPO keeps `alpha` constant, and TARPO follows the
//! exponential decay schedule. A TARPO run with `gamma = 0` and `lambda = 0`
//! therefore reproduces the GRPO trajectory bit for bit under shared seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advantage::{GroupAdvantages, GroupRewards};
use crate::objective::{objective_logp_gradients, tarpo_objective, ObjectiveTerm};
use crate::reward::{alpha_schedule, answer_reward, region_reward, RewardConfig};

use super::policy::{
    rollout_logp_grad, sample_group, greedy_rollout, PolicyParams, RolloutOptions, ToyPolicy,
};
use super::task::{PreparedTask, SyntheticTask};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    /// The objective or the policy parameters became non-finite.
    #[error("training diverged at step {step}")]
    DivergenceDetected { step: u64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// The three training arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Answer-only reward, no consistency penalty.
    Grpo,
    /// Constant region weight `alpha_fixed`.
    TarpoFixed,
    /// Exponentially decaying region weight.
    Tarpo,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Grpo => "grpo",
            Algorithm::TarpoFixed => "tarpo-fixed",
            Algorithm::Tarpo => "tarpo",
        }
    }
}

/// Training hyperparameters. Defaults give the desk-scale benchmark setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub reward: RewardConfig,
    /// Region weight of the fixed-weight arm.
    pub alpha_fixed: f64,
    /// Rollouts per question.
    pub group_size: usize,
    pub steps: u64,
    /// Questions per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Validation cadence in steps; 0 evaluates only at the end.
    pub eval_every: u64,
    /// Decay factor of the smoothed statistic streams.
    pub ema_decay: f64,
    /// Scale of the uniform noise initializing the policy.
    pub init_scale: f64,
    pub base_response_length: usize,
    /// Couples the verbosity factor into the answer reward (off by default:
    /// region-focused shaping only).
    pub verbosity_answer_coupling: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::Tarpo,
            reward: RewardConfig::default(),
            alpha_fixed: 0.15,
            group_size: 16,
            steps: 240,
            batch_size: 4,
            learning_rate: 0.1,
            eval_every: 30,
            ema_decay: 0.05,
            init_scale: 0.2,
            base_response_length: 32,
            verbosity_answer_coupling: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.reward
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if self.group_size < 2 {
            return Err(SimError::InvalidConfig(format!(
                "group_size must be at least 2, got {}",
                self.group_size
            )));
        }
        if self.batch_size == 0 {
            return Err(SimError::InvalidConfig("batch_size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "learning_rate must be a positive finite number, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha_fixed) {
            return Err(SimError::InvalidConfig(format!(
                "alpha_fixed must be in [0, 1], got {}",
                self.alpha_fixed
            )));
        }
        if self.ema_decay.is_nan() || self.ema_decay <= 0.0 || self.ema_decay > 1.0 {
            return Err(SimError::InvalidConfig(format!(
                "ema_decay must be in (0, 1], got {}",
                self.ema_decay
            )));
        }
        if !self.init_scale.is_finite() || self.init_scale < 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "init_scale must be a finite non-negative number, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }

    /// The region weight at a step for this arm.
    pub fn alpha_at(&self, step: u64) -> f64 {
        match self.algorithm {
            Algorithm::Grpo => 0.0,
            Algorithm::TarpoFixed => self.alpha_fixed,
            Algorithm::Tarpo => alpha_schedule(step, &self.reward),
        }
    }

    /// The consistency penalty strength for this arm.
    pub fn lambda(&self) -> f64 {
        match self.algorithm {
            Algorithm::Grpo => 0.0,
            _ => self.reward.lambda,
        }
    }

    fn rollout_options(&self) -> RolloutOptions {
        RolloutOptions {
            base_response_length: self.base_response_length,
            verbosity_answer_coupling: self.verbosity_answer_coupling,
        }
    }
}

/// Train/validation task split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub train: Vec<SyntheticTask>,
    pub val: Vec<SyntheticTask>,
}

impl TaskSet {
    /// Splits generated tasks 9:1, the trailing tenth becoming validation.
    pub fn split_nine_to_one(tasks: Vec<SyntheticTask>) -> TaskSet {
        let n = tasks.len();
        let val_count = if n >= 10 {
            n / 10
        } else if n >= 2 {
            1
        } else {
            0
        };
        let mut train = tasks;
        let val = train.split_off(n - val_count);
        TaskSet { train, val }
    }
}

/// One step's logged statistics; the smoothed copies use the configured
/// decay with `y_0 = x_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub mean_reward: f64,
    pub mean_region_reward: f64,
    pub train_acc: f64,
    pub mean_len: f64,
    pub alpha: f64,
    pub ema_mean_reward: f64,
    pub ema_mean_region_reward: f64,
    pub ema_train_acc: f64,
    pub ema_mean_len: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_acc: Option<f64>,
}

/// End-of-run metrics: the greedy validation evaluation plus training-time
/// aggregates. `train_mean_len` is the mean of the per-step mean response
/// lengths over the whole run, the token-consumption analog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: u64,
    pub final_alpha: f64,
    pub val_acc: f64,
    pub val_region_reward: f64,
    pub val_mean_len: f64,
    pub train_mean_len: f64,
    pub train_mean_reward: f64,
    pub std_clamp_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub steps: Vec<StepRecord>,
    pub summary: TrainSummary,
}

pub struct TrainOutcome {
    pub stats: TrainStats,
    pub policy: ToyPolicy,
}

/// Greedy evaluation metrics over a task list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub mean_region_reward: f64,
    pub mean_response_length: f64,
}

/// Evaluates a policy by greedy decoding per factor; accuracy uses the same
/// answer reward as training. Side-effect free.
pub fn evaluate(
    policy: &ToyPolicy,
    tasks: &[PreparedTask],
    reward: &RewardConfig,
    options: &RolloutOptions,
) -> EvalMetrics {
    if tasks.is_empty() {
        return EvalMetrics {
            accuracy: 0.0,
            mean_region_reward: 0.0,
            mean_response_length: 0.0,
        };
    }
    let per_task: Vec<(f64, f64, f64)> = tasks
        .par_iter()
        .map(|prepared| {
            let rollout = greedy_rollout(policy, prepared, options);
            let r_t = region_reward(&rollout.region, &prepared.task.gold_region);
            let r_a = answer_reward(
                rollout.answer_text.as_deref().unwrap_or(""),
                &prepared.task.gold_answer,
                reward,
            );
            (r_a, r_t, rollout.response_length as f64)
        })
        .collect();
    let n = per_task.len() as f64;
    EvalMetrics {
        accuracy: per_task.iter().map(|t| t.0).sum::<f64>() / n,
        mean_region_reward: per_task.iter().map(|t| t.1).sum::<f64>() / n,
        mean_response_length: per_task.iter().map(|t| t.2).sum::<f64>() / n,
    }
}

struct GroupResult {
    grad: PolicyParams,
    objective: f64,
    sum_mixed: f64,
    sum_region: f64,
    sum_answer: f64,
    sum_len: f64,
    rollouts: usize,
    std_clamped: bool,
}

fn run_group(
    policy: &ToyPolicy,
    prepared: &PreparedTask,
    config: &TrainConfig,
    alpha: f64,
    lambda: f64,
    seed: u64,
) -> GroupResult {
    let options = config.rollout_options();
    let rollouts = sample_group(policy, prepared, config.group_size, seed, &options);

    let pairs: Vec<(f64, f64)> = rollouts
        .iter()
        .map(|rollout| {
            let r_t = region_reward(&rollout.region, &prepared.task.gold_region);
            let r_a = answer_reward(
                rollout.answer_text.as_deref().unwrap_or(""),
                &prepared.task.gold_answer,
                &config.reward,
            );
            (r_t, r_a)
        })
        .collect();

    let rewards = GroupRewards::new(alpha, pairs.iter().copied());
    let advantages = GroupAdvantages::compute(&rewards, lambda)
        .expect("group size is validated to be at least 2");

    let terms: Vec<ObjectiveTerm> = rollouts
        .iter()
        .zip(advantages.rollouts())
        .map(|(rollout, adv)| ObjectiveTerm {
            log_probs: rollout.log_probs,
            effective_advantage: adv.effective,
        })
        .collect();

    let objective = tarpo_objective(&terms, config.reward.epsilon, config.reward.beta);
    let coefficients =
        objective_logp_gradients(&terms, config.reward.epsilon, config.reward.beta);

    let mut grad = PolicyParams::default();
    for (rollout, coefficient) in rollouts.iter().zip(coefficients) {
        let logp_grad = rollout_logp_grad(policy.params(), prepared, &rollout.choice);
        grad.axpy(coefficient, &logp_grad);
    }

    GroupResult {
        grad,
        objective,
        sum_mixed: rewards.entries().iter().map(|e| e.mixed).sum(),
        sum_region: pairs.iter().map(|p| p.0).sum(),
        sum_answer: pairs.iter().map(|p| p.1).sum(),
        sum_len: rollouts.iter().map(|r| r.response_length as f64).sum(),
        rollouts: rollouts.len(),
        std_clamped: advantages.std_clamped(),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_seed(a: u64, b: u64, c: u64) -> u64 {
    splitmix64(a ^ splitmix64(b.wrapping_add(splitmix64(c))))
}

/// Runs one training arm. Fully deterministic given `(config, tasks, seed)`;
/// batches cycle through the training tasks in order, and group seeds are
/// derived from the run seed, the step, and the batch slot.
pub fn train(config: &TrainConfig, tasks: &TaskSet, seed: u64) -> Result<TrainOutcome, SimError> {
    config.validate()?;
    if tasks.train.is_empty() {
        return Err(SimError::InvalidConfig(
            "the training split needs at least one task".into(),
        ));
    }

    let train_tasks: Vec<PreparedTask> = tasks
        .train
        .iter()
        .map(|t| PreparedTask::prepare(t.clone()))
        .collect();
    let val_tasks: Vec<PreparedTask> = tasks
        .val
        .iter()
        .map(|t| PreparedTask::prepare(t.clone()))
        .collect();

    let options = config.rollout_options();
    let mut policy = ToyPolicy::init_random(mix_seed(seed, 0, 0), config.init_scale);

    let mut steps = Vec::with_capacity(config.steps as usize);
    let mut ema_reward = None;
    let mut ema_region = None;
    let mut ema_acc = None;
    let mut ema_len = None;
    let mut std_clamp_events = 0u64;

    for step in 0..config.steps {
        let alpha = config.alpha_at(step);
        let lambda = config.lambda();

        let batch: Vec<usize> = (0..config.batch_size)
            .map(|i| (step as usize * config.batch_size + i) % train_tasks.len())
            .collect();

        let results: Vec<GroupResult> = batch
            .par_iter()
            .enumerate()
            .map(|(slot, &task_index)| {
                let group_seed = mix_seed(seed, step.wrapping_add(1), slot as u64);
                run_group(
                    &policy,
                    &train_tasks[task_index],
                    config,
                    alpha,
                    lambda,
                    group_seed,
                )
            })
            .collect();

        let mut grad = PolicyParams::default();
        let mut objective_sum = 0.0;
        let mut sum_mixed = 0.0;
        let mut sum_region = 0.0;
        let mut sum_answer = 0.0;
        let mut sum_len = 0.0;
        let mut rollout_count = 0usize;
        for result in &results {
            grad.axpy(1.0, &result.grad);
            objective_sum += result.objective;
            sum_mixed += result.sum_mixed;
            sum_region += result.sum_region;
            sum_answer += result.sum_answer;
            sum_len += result.sum_len;
            rollout_count += result.rollouts;
            if result.std_clamped {
                std_clamp_events += 1;
            }
        }
        grad.scale(1.0 / results.len() as f64);
        let objective = objective_sum / results.len() as f64;

        if !objective.is_finite() {
            return Err(SimError::DivergenceDetected { step });
        }
        policy.ascend(&grad, config.learning_rate);
        if !policy.params().is_finite() {
            return Err(SimError::DivergenceDetected { step });
        }

        let n = rollout_count as f64;
        let mean_reward = sum_mixed / n;
        let mean_region_reward = sum_region / n;
        let train_acc = sum_answer / n;
        let mean_len = sum_len / n;

        let d = config.ema_decay;
        let smooth = |prev: &mut Option<f64>, x: f64| -> f64 {
            let y = match *prev {
                None => x,
                Some(p) => (1.0 - d) * p + d * x,
            };
            *prev = Some(y);
            y
        };
        let ema_mean_reward = smooth(&mut ema_reward, mean_reward);
        let ema_mean_region_reward = smooth(&mut ema_region, mean_region_reward);
        let ema_train_acc = smooth(&mut ema_acc, train_acc);
        let ema_mean_len = smooth(&mut ema_len, mean_len);

        let is_last = step + 1 == config.steps;
        let val_acc = if is_last
            || (config.eval_every > 0 && (step + 1) % config.eval_every == 0)
        {
            Some(evaluate(&policy, &val_tasks, &config.reward, &options).accuracy)
        } else {
            None
        };

        steps.push(StepRecord {
            step,
            mean_reward,
            mean_region_reward,
            train_acc,
            mean_len,
            alpha,
            ema_mean_reward,
            ema_mean_region_reward,
            ema_train_acc,
            ema_mean_len,
            val_acc,
        });
    }

    let final_eval = evaluate(&policy, &val_tasks, &config.reward, &options);
    let step_count = steps.len().max(1) as f64;
    let summary = TrainSummary {
        steps: config.steps,
        final_alpha: config.alpha_at(config.steps.saturating_sub(1)),
        val_acc: final_eval.accuracy,
        val_region_reward: final_eval.mean_region_reward,
        val_mean_len: final_eval.mean_response_length,
        train_mean_len: steps.iter().map(|s| s.mean_len).sum::<f64>() / step_count,
        train_mean_reward: steps.iter().map(|s| s.mean_reward).sum::<f64>() / step_count,
        std_clamp_events,
    };

    Ok(TrainOutcome {
        stats: TrainStats { steps, summary },
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::task::{generate_tasks, TaskShape};

    fn small_task_set() -> TaskSet {
        TaskSet::split_nine_to_one(generate_tasks(100, 30, &TaskShape::default()))
    }

    fn quick_config(algorithm: Algorithm) -> TrainConfig {
        TrainConfig {
            algorithm,
            steps: 10,
            batch_size: 4,
            group_size: 8,
            eval_every: 5,
            ..Default::default()
        }
    }

    #[test]
    fn split_nine_to_one_proportions() {
        let tasks = generate_tasks(1, 500, &TaskShape::default());
        let set = TaskSet::split_nine_to_one(tasks);
        assert_eq!(set.train.len(), 450);
        assert_eq!(set.val.len(), 50);

        let tiny = TaskSet::split_nine_to_one(generate_tasks(1, 5, &TaskShape::default()));
        assert_eq!(tiny.train.len(), 4);
        assert_eq!(tiny.val.len(), 1);
    }

    #[test]
    fn zero_steps_returns_initial_policy() {
        let tasks = small_task_set();
        let config = TrainConfig {
            steps: 0,
            ..quick_config(Algorithm::Tarpo)
        };
        let outcome = train(&config, &tasks, 7).unwrap();
        assert!(outcome.stats.steps.is_empty());
        let fresh = ToyPolicy::init_random(
            super::mix_seed(7, 0, 0),
            config.init_scale,
        );
        assert_eq!(outcome.policy.params(), fresh.params());
        assert_eq!(outcome.policy.params(), outcome.policy.reference());
    }

    #[test]
    fn training_is_deterministic() {
        let tasks = small_task_set();
        let config = quick_config(Algorithm::Tarpo);
        let a = train(&config, &tasks, 3).unwrap();
        let b = train(&config, &tasks, 3).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.policy.params(), b.policy.params());
        let c = train(&config, &tasks, 4).unwrap();
        assert_ne!(a.stats, c.stats);
    }

    #[test]
    fn tarpo_with_zero_gamma_collapses_to_grpo() {
        let tasks = small_task_set();
        let grpo = quick_config(Algorithm::Grpo);
        let mut collapsed = quick_config(Algorithm::Tarpo);
        collapsed.reward.gamma = 0.0;
        collapsed.reward.lambda = 0.0;

        let a = train(&grpo, &tasks, 11).unwrap();
        let b = train(&collapsed, &tasks, 11).unwrap();
        assert_eq!(a.stats.steps, b.stats.steps);
        assert_eq!(a.policy.params(), b.policy.params());
    }

    #[test]
    fn alpha_stream_matches_arm() {
        let tasks = small_task_set();
        let grpo = train(&quick_config(Algorithm::Grpo), &tasks, 5).unwrap();
        assert!(grpo.stats.steps.iter().all(|s| s.alpha == 0.0));

        let fixed = train(&quick_config(Algorithm::TarpoFixed), &tasks, 5).unwrap();
        assert!(fixed.stats.steps.iter().all(|s| s.alpha == 0.15));

        let tarpo = train(&quick_config(Algorithm::Tarpo), &tasks, 5).unwrap();
        assert_eq!(tarpo.stats.steps[0].alpha, 0.3);
        for pair in tarpo.stats.steps.windows(2) {
            assert!(pair[1].alpha < pair[0].alpha);
        }
    }

    #[test]
    fn logged_values_stay_in_range() {
        let tasks = small_task_set();
        let outcome = train(&quick_config(Algorithm::Tarpo), &tasks, 13).unwrap();
        for record in &outcome.stats.steps {
            assert!((0.0..=1.0).contains(&record.mean_reward));
            assert!((0.0..=1.0).contains(&record.mean_region_reward));
            assert!((0.0..=1.0).contains(&record.train_acc));
            assert!(record.mean_len > 0.0);
            if let Some(acc) = record.val_acc {
                assert!((0.0..=1.0).contains(&acc));
            }
        }
        assert!((0.0..=1.0).contains(&outcome.stats.summary.val_acc));
    }

    #[test]
    fn ema_streams_follow_the_recurrence() {
        let tasks = small_task_set();
        let config = quick_config(Algorithm::Tarpo);
        let outcome = train(&config, &tasks, 17).unwrap();
        let raw: Vec<f64> = outcome.stats.steps.iter().map(|s| s.mean_reward).collect();
        let smoothed = crate::sim::ema(&raw, config.ema_decay);
        for (record, expected) in outcome.stats.steps.iter().zip(smoothed) {
            assert_eq!(record.ema_mean_reward, expected);
        }
    }

    #[test]
    fn evaluation_is_repeatable() {
        let tasks = small_task_set();
        let prepared: Vec<PreparedTask> = tasks
            .val
            .iter()
            .map(|t| PreparedTask::prepare(t.clone()))
            .collect();
        let policy = ToyPolicy::init_random(9, 0.2);
        let reward = RewardConfig::default();
        let options = RolloutOptions::default();
        let a = evaluate(&policy, &prepared, &reward, &options);
        let b = evaluate(&policy, &prepared, &reward, &options);
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_detected() {
        let tasks = small_task_set();
        let mut config = quick_config(Algorithm::Tarpo);
        // An infinite KL coefficient turns the objective into NaN on the
        // first step (inf * 0 at the on-policy start).
        config.reward.beta = f64::INFINITY;
        match train(&config, &tasks, 3) {
            Err(SimError::DivergenceDetected { step: 0 }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|o| o.stats.summary)),
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let tasks = small_task_set();
        let config = TrainConfig {
            group_size: 1,
            ..Default::default()
        };
        assert!(matches!(
            train(&config, &tasks, 1),
            Err(SimError::InvalidConfig(_))
        ));
    }
}
