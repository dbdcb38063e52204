//! Reward computation: the binary answer reward, the region IoU reward, the
//! decaying region weight, and the mixed per-rollout reward.
//!
//! The mixed reward is `alpha * r_t + (1 - alpha) * r_a`, where `r_t` is the
//! averaged row/column intersection-over-union between predicted and gold
//! regions and `r_a` is 1 exactly when the predicted answer matches the gold
//! answer. The region weight decays as `gamma * exp(-rho * step)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::TableRegion;

/// A hyperparameter outside its documented range.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid reward config: {0}")]
pub struct RewardConfigError(pub String);

/// Scalar hyperparameters of the reward and objective, plus answer-matching
/// options.
///
/// `epsilon` and `beta` have no published values; the defaults 0.2 and 0.001
/// are common practice, not sourced, and should be treated as tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Rouge-L acceptance threshold for string answers, in [0, 1].
    pub zeta: f64,
    /// Initial region weight, in [0, 1].
    pub gamma: f64,
    /// Decay coefficient of the region weight, > 0.
    pub rho: f64,
    /// Consistency penalty strength, >= 0.
    pub lambda: f64,
    /// Clip radius of the surrogate objective, > 0.
    pub epsilon: f64,
    /// KL regularization coefficient, >= 0.
    pub beta: f64,
    /// Absolute tolerance for numeric answer equality.
    pub numeric_tolerance: f64,
    /// When true, a Rouge-L score equal to `zeta` is accepted; the default
    /// reads "exceeds the threshold" strictly.
    pub rouge_inclusive: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            zeta: 0.6,
            gamma: 0.3,
            rho: 9e-4,
            lambda: 0.1,
            epsilon: 0.2,
            beta: 0.001,
            numeric_tolerance: 1e-9,
            rouge_inclusive: false,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardConfigError> {
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(RewardConfigError(format!(
                "zeta must be in [0, 1], got {}",
                self.zeta
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(RewardConfigError(format!(
                "gamma must be in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.rho.is_nan() || self.rho <= 0.0 {
            return Err(RewardConfigError(format!(
                "rho must be > 0, got {}",
                self.rho
            )));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(RewardConfigError(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(RewardConfigError(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(RewardConfigError(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if self.numeric_tolerance.is_nan() || self.numeric_tolerance < 0.0 {
            return Err(RewardConfigError(format!(
                "numeric_tolerance must be >= 0, got {}",
                self.numeric_tolerance
            )));
        }
        Ok(())
    }
}

/// The gold answer: a number, a string, or an unordered list of strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum AnswerSpec {
    Numeric(f64),
    Text(String),
    List(Vec<String>),
}

/// Binary answer reward: 1 when the prediction matches the gold answer
/// under the per-kind rule, 0 otherwise. Unparseable predictions score 0
/// and never raise an error.
///
/// Numeric gold matches when the prediction parses numerically and agrees
/// within `numeric_tolerance`. Text gold matches when the Rouge-L score
/// exceeds `zeta`. List gold matches when every gold element is matched by
/// some comma-separated predicted element, order-insensitive.
pub fn answer_reward(predicted: &str, gold: &AnswerSpec, config: &RewardConfig) -> f64 {
    let matched = match gold {
        AnswerSpec::Numeric(value) => numeric_matches(predicted, *value, config),
        AnswerSpec::Text(text) => text_matches(predicted, text, config),
        AnswerSpec::List(items) => {
            let elements: Vec<&str> = predicted
                .split(',')
                .map(str::trim)
                .filter(|e| !e.is_empty())
                .collect();
            items.iter().all(|item| {
                elements.iter().any(|e| match parse_numeric(item) {
                    Some(value) => numeric_matches(e, value, config),
                    None => text_matches(e, item, config),
                })
            })
        }
    };
    if matched {
        1.0
    } else {
        0.0
    }
}

fn numeric_matches(predicted: &str, gold: f64, config: &RewardConfig) -> bool {
    match parse_numeric(predicted) {
        Some(value) => (value - gold).abs() <= config.numeric_tolerance,
        None => false,
    }
}

fn text_matches(predicted: &str, gold: &str, config: &RewardConfig) -> bool {
    let score = rouge_l(predicted, gold);
    if config.rouge_inclusive {
        score >= config.zeta
    } else {
        score > config.zeta
    }
}

/// Locale-free numeric parsing: strips thousands-separator commas, a
/// trailing percent sign, and a leading currency symbol before parsing.
/// The percent sign is dropped, not scaled ("75%" parses as 75).
pub fn parse_numeric(text: &str) -> Option<f64> {
    let mut s = text.trim();
    for symbol in ['$', '€', '£', '¥'] {
        if let Some(rest) = s.strip_prefix(symbol) {
            s = rest.trim_start();
            break;
        }
    }
    if let Some(rest) = s.strip_suffix('%') {
        s = rest.trim_end();
    }
    let cleaned: String = s.chars().filter(|&c| c != ',').collect();
    let value: f64 = cleaned.parse().ok()?;
    value.is_finite().then_some(value)
}

/// Rouge-L between two strings: the balanced F-measure of LCS precision and
/// recall over tokens, which simplifies to `2 * LCS / (|pred| + |ref|)`.
/// Returns 0 when either side has no tokens. Tokens are produced by
/// lowercasing, stripping ASCII punctuation, and splitting on whitespace.
pub fn rouge_l(prediction: &str, reference: &str) -> f64 {
    let pred = tokenize(prediction);
    let refr = tokenize(reference);
    if pred.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let lcs = lcs_length(&pred, &refr);
    2.0 * lcs as f64 / (pred.len() + refr.len()) as f64
}

/// Lowercases, removes ASCII punctuation characters, and splits on
/// whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .filter_map(|word| {
            let token: String = word.chars().filter(|c| !c.is_ascii_punctuation()).collect();
            (!token.is_empty()).then_some(token)
        })
        .collect()
}

/// Longest common subsequence length over token slices, two-row dynamic
/// programming.
fn lcs_length(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut current = vec![0usize; b.len() + 1];
    for item in a {
        for (j, other) in b.iter().enumerate() {
            current[j + 1] = if item == other {
                prev[j] + 1
            } else {
                prev[j + 1].max(current[j])
            };
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// Region reward: the mean of the column-axis and row-axis IoU between the
/// predicted and gold regions. On an axis where both sets are empty the IoU
/// is 1 (agreement that nothing is needed).
pub fn region_reward(predicted: &TableRegion, gold: &TableRegion) -> f64 {
    let col = set_iou(predicted.columns(), gold.columns());
    let row = set_iou(predicted.rows(), gold.rows());
    (col + row) / 2.0
}

fn set_iou(a: &std::collections::BTreeSet<usize>, b: &std::collections::BTreeSet<usize>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.union(b).count();
    intersection as f64 / union as f64
}

/// The reward a response with no parseable region receives for the region
/// part.
pub fn missing_region_reward() -> f64 {
    0.0
}

/// The region weight at training step `step`: `gamma * exp(-rho * step)`.
/// Evaluated per optimizer step.
pub fn alpha_schedule(step: u64, config: &RewardConfig) -> f64 {
    config.gamma * (-config.rho * step as f64).exp()
}

/// The mixed reward `alpha * r_t + (1 - alpha) * r_a`.
pub fn mixed_reward(region_reward: f64, answer_reward: f64, alpha: f64) -> f64 {
    alpha * region_reward + (1.0 - alpha) * answer_reward
}
