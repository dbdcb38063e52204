//! Group-relative advantage normalization, its region/answer decomposition,
//! and the consistency penalty.
//!
//! For a group of G mixed rewards, the normalized advantage of rollout i is
//! `A_i = (r_i - mean(r)) / std(r)` with the population standard deviation.
//! Because `r = alpha * r_t + (1 - alpha) * r_a`, the advantage decomposes
//! exactly into a region component and an answer component, both normalized
//! by the std of the mixed rewards. A rollout whose raw region and answer
//! deviations point in opposite directions receives the penalty
//! `P = -lambda * dA_t * dA_a`, which is subtracted from its advantage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reward::mixed_reward;

/// The divisor floor applied when the group standard deviation is tiny but
/// nonzero.
pub const STD_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdvantageError {
    #[error("group needs at least 2 rollouts, got {0}")]
    GroupTooSmall(usize),
}

/// Per-rollout reward triple. The mixed reward is always recomputed from
/// the parts, never trusted from callers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTriple {
    pub region: f64,
    pub answer: f64,
    pub mixed: f64,
}

/// The rewards of one sampled group, all mixed with the same weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRewards {
    alpha: f64,
    entries: Vec<RewardTriple>,
}

impl GroupRewards {
    /// Builds a group from `(region_reward, answer_reward)` pairs, computing
    /// each mixed reward from `alpha`.
    pub fn new(alpha: f64, rewards: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let entries = rewards
            .into_iter()
            .map(|(region, answer)| RewardTriple {
                region,
                answer,
                mixed: mixed_reward(region, answer, alpha),
            })
            .collect();
        GroupRewards { alpha, entries }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn entries(&self) -> &[RewardTriple] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Advantage pieces for one rollout.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RolloutAdvantage {
    /// Normalized advantage A.
    pub advantage: f64,
    /// Region component dA_t of the decomposition.
    pub region_component: f64,
    /// Answer component dA_a of the decomposition.
    pub answer_component: f64,
    /// Consistency penalty P (0 for sign-consistent rollouts).
    pub penalty: f64,
    /// Effective advantage A - P.
    pub effective: f64,
}

/// Normalized advantages for a whole group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAdvantages {
    alpha: f64,
    rollouts: Vec<RolloutAdvantage>,
    /// True when the std divisor was clamped at [`STD_CLAMP`], i.e. the
    /// group std was tiny but nonzero.
    std_clamped: bool,
}

impl GroupAdvantages {
    /// Runs the full pipeline: normalization, consistency penalties, and
    /// effective advantages.
    pub fn compute(rewards: &GroupRewards, lambda: f64) -> Result<Self, AdvantageError> {
        let mut group = normalize_group(rewards)?;
        let penalties = consistency_penalty(&group, rewards, lambda);
        for (rollout, penalty) in group.rollouts.iter_mut().zip(penalties) {
            rollout.penalty = penalty;
        }
        effective_advantage(&mut group);
        Ok(group)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rollouts(&self) -> &[RolloutAdvantage] {
        &self.rollouts
    }

    pub fn std_clamped(&self) -> bool {
        self.std_clamped
    }
}

/// Normalizes a group: `A_i = (r_i - mean(r)) / std(r)` with population
/// standard deviation, plus the region/answer decomposition normalized by
/// the same divisor. A zero-variance group yields all-zero components; a
/// tiny nonzero std is clamped at [`STD_CLAMP`] and flagged.
pub fn normalize_group(rewards: &GroupRewards) -> Result<GroupAdvantages, AdvantageError> {
    let count = rewards.len();
    if count < 2 {
        return Err(AdvantageError::GroupTooSmall(count));
    }
    let n = count as f64;
    let alpha = rewards.alpha();
    let entries = rewards.entries();

    let mean_mixed = entries.iter().map(|e| e.mixed).sum::<f64>() / n;
    let mean_region = entries.iter().map(|e| e.region).sum::<f64>() / n;
    let mean_answer = entries.iter().map(|e| e.answer).sum::<f64>() / n;
    let variance = entries
        .iter()
        .map(|e| (e.mixed - mean_mixed).powi(2))
        .sum::<f64>()
        / n;
    let std = variance.sqrt();

    let rollouts = if std == 0.0 {
        vec![RolloutAdvantage::default(); count]
    } else {
        let divisor = std.max(STD_CLAMP);
        entries
            .iter()
            .map(|e| {
                let advantage = (e.mixed - mean_mixed) / divisor;
                let region_component = alpha * (e.region - mean_region) / divisor;
                let answer_component = (1.0 - alpha) * (e.answer - mean_answer) / divisor;
                RolloutAdvantage {
                    advantage,
                    region_component,
                    answer_component,
                    penalty: 0.0,
                    effective: advantage,
                }
            })
            .collect()
    };

    Ok(GroupAdvantages {
        alpha,
        rollouts,
        std_clamped: std != 0.0 && std < STD_CLAMP,
    })
}

/// Consistency penalties per rollout. The sign test uses the raw reward
/// deviations `dr_t = r_t - mean(r_t)` and `dr_a = r_a - mean(r_a)`; the
/// magnitude uses the advantage components. A zero product (an exact tie on
/// either axis) takes the no-penalty branch.
pub fn consistency_penalty(
    group: &GroupAdvantages,
    rewards: &GroupRewards,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len() as f64;
    let entries = rewards.entries();
    let mean_region = entries.iter().map(|e| e.region).sum::<f64>() / n;
    let mean_answer = entries.iter().map(|e| e.answer).sum::<f64>() / n;

    group
        .rollouts
        .iter()
        .zip(entries)
        .map(|(rollout, entry)| {
            let region_dev = entry.region - mean_region;
            let answer_dev = entry.answer - mean_answer;
            if region_dev * answer_dev < 0.0 {
                -lambda * rollout.region_component * rollout.answer_component
            } else {
                0.0
            }
        })
        .collect()
}

/// Sets each rollout's effective advantage to `A - P`.
pub fn effective_advantage(group: &mut GroupAdvantages) {
    for rollout in &mut group.rollouts {
        rollout.effective = rollout.advantage - rollout.penalty;
    }
}
