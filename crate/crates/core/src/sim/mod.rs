//! Desk-scale substitute for LLM rollouts: a synthetic table-QA task
//! generator, a small parametric policy emitting (region, answer, length),
//! group sampling, and the training loop comparing GRPO, fixed-weight
//! TARPO, and decaying-weight TARPO.

mod policy;
mod task;
mod train;

pub use policy::{
    col_weight_index, factor_probs, greedy_rollout, rollout_logp, rollout_logp_grad,
    row_weight_index, sample_group, strategy_answer, strategy_logit_index,
    verbosity_logit_index, verbosity_probs, FactorProbs, PolicyParams, RolloutChoice,
    RolloutOptions, RolloutOutcome, Strategy, ToyPolicy, AXIS_FEATURE_COUNT, PARAM_COUNT,
    QUESTION_KIND_COUNT, STRATEGIES, STRATEGY_COUNT, VERBOSITY_LEVELS,
};
pub use task::{
    generate_tasks, needed_columns, relevant_rows, CandidateSet, Filter, PreparedTask,
    QuestionKind, QuestionSpec, SyntheticTask, TaskShape,
};
pub use train::{
    evaluate, train, Algorithm, EvalMetrics, SimError, StepRecord, TaskSet, TrainConfig,
    TrainOutcome, TrainStats, TrainSummary,
};

/// Exponential moving average with `y_0 = x_0` and
/// `y_t = (1 - decay) * y_{t-1} + decay * x_t`.
pub fn ema(series: &[f64], decay: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut prev: Option<f64> = None;
    for &x in series {
        let y = match prev {
            None => x,
            Some(p) => (1.0 - decay) * p + decay * x,
        };
        out.push(y);
        prev = Some(y);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::ema;

    #[test]
    fn ema_constant_series_is_identity() {
        let series = [0.7; 5];
        assert_eq!(ema(&series, 0.05), series.to_vec());
    }

    #[test]
    fn ema_decay_one_is_identity() {
        let series = [0.1, 0.9, 0.4];
        assert_eq!(ema(&series, 1.0), series.to_vec());
    }

    #[test]
    fn ema_worked_recurrence() {
        // x = [0, 1, 1], d = 0.05:
        // y0 = 0; y1 = 0.95*0 + 0.05 = 0.05; y2 = 0.95*0.05 + 0.05 = 0.0975.
        let out = ema(&[0.0, 1.0, 1.0], 0.05);
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 0.05).abs() < 1e-15);
        assert!((out[2] - 0.0975).abs() < 1e-15);
    }

    #[test]
    fn ema_empty_series() {
        assert!(ema(&[], 0.5).is_empty());
    }
}
