//! The clipped, KL-regularized surrogate objective over a group of rollouts.
//!
//! Each rollout carries a sequence-level importance ratio
//! `exp(logp_current - logp_old)` and a penalty-adjusted advantage. The
//! per-rollout term is `min(ratio * A_eff, clip(ratio, 1-eps, 1+eps) * A_eff)`
//! and the group objective averages those terms minus `beta` times the mean
//! per-sample KL estimate against the frozen reference policy. Higher is
//! better; trainers negate it for descent-style optimizers.

use serde::{Deserialize, Serialize};

/// Log-probabilities of one sampled response under the three policies
/// involved in an update: the policy being optimized, the behavior policy
/// that sampled the response, and the frozen reference policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutLogProbs {
    pub current: f64,
    pub old: f64,
    pub reference: f64,
}

/// Sequence-level importance ratio `exp(logp_current - logp_old)`. Not
/// clamped here; clipping happens in the surrogate.
pub fn importance_ratio(log_probs: &RolloutLogProbs) -> f64 {
    (log_probs.current - log_probs.old).exp()
}

/// One clipped surrogate term:
/// `min(ratio * a_eff, clip(ratio, 1 - epsilon, 1 + epsilon) * a_eff)`.
pub fn clipped_term(ratio: f64, effective_advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * effective_advantage).min(clipped * effective_advantage)
}

/// Nonnegative per-sample KL estimate of `D_KL(pi_current || pi_ref)`:
/// `exp(d) - d - 1` with `d = logp_ref - logp_current`. Computed through
/// `exp_m1` to avoid cancellation near zero and floored at 0.
pub fn kl_penalty(log_probs: &RolloutLogProbs) -> f64 {
    let d = log_probs.reference - log_probs.current;
    (d.exp_m1() - d).max(0.0)
}

/// One rollout's contribution to the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerm {
    pub log_probs: RolloutLogProbs,
    pub effective_advantage: f64,
}

/// The group objective:
/// `(1/G) * sum_i clipped_term(ratio_i, A_eff_i, epsilon) - beta * mean_i(kl_i)`.
/// Returns 0 for an empty group.
pub fn tarpo_objective(terms: &[ObjectiveTerm], epsilon: f64, beta: f64) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let n = terms.len() as f64;
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    for term in terms {
        let ratio = importance_ratio(&term.log_probs);
        surrogate += clipped_term(ratio, term.effective_advantage, epsilon);
        kl += kl_penalty(&term.log_probs);
    }
    surrogate / n - beta * kl / n
}

/// The partial derivative of [`tarpo_objective`] with respect to each
/// rollout's `logp_current`, in rollout order. Callers chain these
/// coefficients with their policy's `d logp / d theta` to get the analytic
/// parameter gradient.
///
/// The unclipped branch contributes `A_eff * ratio`; a saturated clip
/// contributes 0 (the min selects a locally constant term). Ties take the
/// unclipped branch.
pub fn objective_logp_gradients(terms: &[ObjectiveTerm], epsilon: f64, beta: f64) -> Vec<f64> {
    let n = terms.len() as f64;
    terms
        .iter()
        .map(|term| {
            let ratio = importance_ratio(&term.log_probs);
            let a = term.effective_advantage;
            let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
            let policy_grad = if ratio * a <= clipped * a { a * ratio } else { 0.0 };
            let d = term.log_probs.reference - term.log_probs.current;
            let kl_grad = 1.0 - d.exp();
            (policy_grad - beta * kl_grad) / n
        })
        .collect()
}
