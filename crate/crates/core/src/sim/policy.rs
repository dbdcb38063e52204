//! A small parametric policy over table-QA rollouts.
//!
//! The policy factors a rollout into four independent categorical choices:
//! a column subset and a row subset (scored by feature weights against the
//! task's candidate lists), an answer strategy, and a verbosity level. The
//! content factors carry one weight block per question kind, so successes
//! on one kind do not transfer to the others; the verbosity factor is a
//! single global block of per-slot logits. The log-probability of a rollout
//! is the sum of the factor log-probabilities, and its parameter gradient
//! is the usual softmax score function, so the whole choice space stays
//! exhaustively enumerable for oracles.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::objective::RolloutLogProbs;
use crate::reward::parse_numeric;
use crate::table::{extract_subtable, serialize_region, Table, TableRegion};

use super::task::{CandidateSet, PreparedTask, QuestionKind};

/// Feature count per region-axis candidate.
pub const AXIS_FEATURE_COUNT: usize = 4;
/// Extra response length per verbosity level.
pub const VERBOSITY_LEVELS: [usize; 4] = [0, 16, 48, 96];
/// Number of answer strategies.
pub const STRATEGY_COUNT: usize = 6;
/// Number of question kinds with their own weight blocks.
pub const QUESTION_KIND_COUNT: usize = 4;

const KIND_BLOCK: usize = 2 * AXIS_FEATURE_COUNT + STRATEGY_COUNT;
/// Total parameter count of the policy.
pub const PARAM_COUNT: usize = QUESTION_KIND_COUNT * KIND_BLOCK + VERBOSITY_LEVELS.len();

fn kind_index(kind: QuestionKind) -> usize {
    match kind {
        QuestionKind::CellLookup => 0,
        QuestionKind::ColumnSum => 1,
        QuestionKind::ColumnMax => 2,
        QuestionKind::FilteredCount => 3,
    }
}

/// Index of a column-axis feature weight in the flat parameter vector.
pub fn col_weight_index(kind: QuestionKind, feature: usize) -> usize {
    kind_index(kind) * KIND_BLOCK + feature
}

/// Index of a row-axis feature weight.
pub fn row_weight_index(kind: QuestionKind, feature: usize) -> usize {
    kind_index(kind) * KIND_BLOCK + AXIS_FEATURE_COUNT + feature
}

/// Index of a strategy logit.
pub fn strategy_logit_index(kind: QuestionKind, strategy: usize) -> usize {
    kind_index(kind) * KIND_BLOCK + 2 * AXIS_FEATURE_COUNT + strategy
}

/// Index of a verbosity logit.
pub fn verbosity_logit_index(level: usize) -> usize {
    QUESTION_KIND_COUNT * KIND_BLOCK + level
}

/// How a rollout turns its selected sub-table into an answer string.
///
/// `Correct` executes the question's own computation; the others are
/// systematic error modes so the answer reward stays informative without
/// any language modeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Correct,
    WrongAggregate,
    WrongColumn,
    /// Computes on the last selected row instead of the whole selection.
    WrongRow,
    /// The correct computation, off by one.
    OffByOne,
    NoAnswer,
}

pub const STRATEGIES: [Strategy; STRATEGY_COUNT] = [
    Strategy::Correct,
    Strategy::WrongAggregate,
    Strategy::WrongColumn,
    Strategy::WrongRow,
    Strategy::OffByOne,
    Strategy::NoAnswer,
];

/// The flat parameter vector of the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams(pub [f64; PARAM_COUNT]);

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams([0.0; PARAM_COUNT])
    }
}

impl PolicyParams {
    /// Uniform noise in `[-scale, scale]` per parameter; breaks argmax ties
    /// at initialization without moving far from the uniform policy.
    pub fn random(seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = [0.0; PARAM_COUNT];
        for v in &mut values {
            *v = if scale > 0.0 {
                rng.random_range(-scale..scale)
            } else {
                0.0
            };
        }
        PolicyParams(values)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &PolicyParams) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += factor * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.0 {
            *v *= factor;
        }
    }

    fn col_weights(&self, kind: QuestionKind) -> &[f64] {
        let base = col_weight_index(kind, 0);
        &self.0[base..base + AXIS_FEATURE_COUNT]
    }

    fn row_weights(&self, kind: QuestionKind) -> &[f64] {
        let base = row_weight_index(kind, 0);
        &self.0[base..base + AXIS_FEATURE_COUNT]
    }

    fn strategy_logits(&self, kind: QuestionKind) -> &[f64] {
        let base = strategy_logit_index(kind, 0);
        &self.0[base..base + STRATEGY_COUNT]
    }

    fn verbosity_logits(&self) -> &[f64] {
        let base = verbosity_logit_index(0);
        &self.0[base..base + VERBOSITY_LEVELS.len()]
    }
}

/// The trainable policy plus its frozen reference copy (the initialization
/// snapshot, never refreshed).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    params: PolicyParams,
    reference: PolicyParams,
}

impl ToyPolicy {
    pub fn new(params: PolicyParams) -> Self {
        let reference = params.clone();
        ToyPolicy { params, reference }
    }

    pub fn init_random(seed: u64, scale: f64) -> Self {
        ToyPolicy::new(PolicyParams::random(seed, scale))
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn reference(&self) -> &PolicyParams {
        &self.reference
    }

    /// Gradient-ascent step on the parameters; the reference stays frozen.
    pub fn ascend(&mut self, gradient: &PolicyParams, learning_rate: f64) {
        self.params.axpy(learning_rate, gradient);
    }
}

/// The four factor indices of one sampled rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutChoice {
    pub column_candidate: usize,
    pub row_candidate: usize,
    pub strategy: usize,
    pub verbosity: usize,
}

/// One sampled response: its predicted region, predicted answer, response
/// length, and log-probabilities under the current and reference policies.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutcome {
    pub region: TableRegion,
    pub answer_text: Option<String>,
    pub response_length: usize,
    pub log_probs: RolloutLogProbs,
    pub choice: RolloutChoice,
}

/// Rollout shaping knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    /// Length every response starts from before verbosity and the region
    /// declaration are added.
    pub base_response_length: usize,
    /// When set, strategies only produce an answer at verbosity levels of
    /// 48 or more, coupling the length channel into the answer reward.
    pub verbosity_answer_coupling: bool,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        RolloutOptions {
            base_response_length: 32,
            verbosity_answer_coupling: false,
        }
    }
}

/// Per-factor probabilities for one task under given parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorProbs {
    pub column: Vec<f64>,
    pub row: Vec<f64>,
    pub strategy: Vec<f64>,
    pub verbosity: Vec<f64>,
}

fn axis_logits(weights: &[f64], candidates: &[CandidateSet]) -> Vec<f64> {
    candidates
        .iter()
        .map(|c| {
            c.features
                .iter()
                .zip(weights)
                .map(|(f, w)| f * w)
                .sum::<f64>()
        })
        .collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
    logits[index] - log_sum
}

/// Factor probabilities of `params` on a prepared task.
pub fn factor_probs(params: &PolicyParams, prepared: &PreparedTask) -> FactorProbs {
    let kind = prepared.task.question.kind();
    FactorProbs {
        column: softmax(&axis_logits(
            params.col_weights(kind),
            &prepared.column_candidates,
        )),
        row: softmax(&axis_logits(
            params.row_weights(kind),
            &prepared.row_candidates,
        )),
        strategy: softmax(params.strategy_logits(kind)),
        verbosity: softmax(params.verbosity_logits()),
    }
}

/// Marginal verbosity probabilities; task-independent because the verbosity
/// factor is one global block of per-slot logits.
pub fn verbosity_probs(params: &PolicyParams) -> Vec<f64> {
    softmax(params.verbosity_logits())
}

/// Log-probability of a rollout choice under `params`.
pub fn rollout_logp(
    params: &PolicyParams,
    prepared: &PreparedTask,
    choice: &RolloutChoice,
) -> f64 {
    let kind = prepared.task.question.kind();
    log_softmax_at(
        &axis_logits(params.col_weights(kind), &prepared.column_candidates),
        choice.column_candidate,
    ) + log_softmax_at(
        &axis_logits(params.row_weights(kind), &prepared.row_candidates),
        choice.row_candidate,
    ) + log_softmax_at(params.strategy_logits(kind), choice.strategy)
        + log_softmax_at(params.verbosity_logits(), choice.verbosity)
}

/// Gradient of [`rollout_logp`] with respect to the parameters: per factor,
/// the chosen option's features minus the probability-weighted feature mean
/// (one-hot features for the slot factors). Only the active kind's blocks
/// and the verbosity block are nonzero.
pub fn rollout_logp_grad(
    params: &PolicyParams,
    prepared: &PreparedTask,
    choice: &RolloutChoice,
) -> PolicyParams {
    let kind = prepared.task.question.kind();
    let mut grad = PolicyParams::default();
    let probs = factor_probs(params, prepared);

    let col_base = col_weight_index(kind, 0);
    axis_grad(
        &mut grad.0[col_base..col_base + AXIS_FEATURE_COUNT],
        &prepared.column_candidates,
        &probs.column,
        choice.column_candidate,
    );
    let row_base = row_weight_index(kind, 0);
    axis_grad(
        &mut grad.0[row_base..row_base + AXIS_FEATURE_COUNT],
        &prepared.row_candidates,
        &probs.row,
        choice.row_candidate,
    );
    let strategy_base = strategy_logit_index(kind, 0);
    slot_grad(
        &mut grad.0[strategy_base..strategy_base + STRATEGY_COUNT],
        &probs.strategy,
        choice.strategy,
    );
    let verbosity_base = verbosity_logit_index(0);
    slot_grad(
        &mut grad.0[verbosity_base..verbosity_base + VERBOSITY_LEVELS.len()],
        &probs.verbosity,
        choice.verbosity,
    );
    grad
}

fn axis_grad(out: &mut [f64], candidates: &[CandidateSet], probs: &[f64], chosen: usize) {
    for (k, slot) in out.iter_mut().enumerate() {
        let expected: f64 = candidates
            .iter()
            .zip(probs)
            .map(|(c, p)| p * c.features[k])
            .sum();
        *slot = candidates[chosen].features[k] - expected;
    }
}

fn slot_grad(out: &mut [f64], probs: &[f64], chosen: usize) {
    for (k, p) in probs.iter().enumerate() {
        out[k] = if k == chosen { 1.0 - p } else { -p };
    }
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate().skip(1) {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

/// Samples a group of rollouts for one task; deterministic given the policy
/// parameters and the seed.
pub fn sample_group(
    policy: &ToyPolicy,
    prepared: &PreparedTask,
    group_size: usize,
    seed: u64,
    options: &RolloutOptions,
) -> Vec<RolloutOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = factor_probs(policy.params(), prepared);
    (0..group_size)
        .map(|_| {
            let choice = RolloutChoice {
                column_candidate: sample_index(&probs.column, &mut rng),
                row_candidate: sample_index(&probs.row, &mut rng),
                strategy: sample_index(&probs.strategy, &mut rng),
                verbosity: sample_index(&probs.verbosity, &mut rng),
            };
            build_rollout(policy, prepared, choice, options)
        })
        .collect()
}

/// Greedy (argmax per factor) rollout, used for evaluation.
pub fn greedy_rollout(
    policy: &ToyPolicy,
    prepared: &PreparedTask,
    options: &RolloutOptions,
) -> RolloutOutcome {
    let probs = factor_probs(policy.params(), prepared);
    let choice = RolloutChoice {
        column_candidate: argmax(&probs.column),
        row_candidate: argmax(&probs.row),
        strategy: argmax(&probs.strategy),
        verbosity: argmax(&probs.verbosity),
    };
    build_rollout(policy, prepared, choice, options)
}

fn build_rollout(
    policy: &ToyPolicy,
    prepared: &PreparedTask,
    choice: RolloutChoice,
    options: &RolloutOptions,
) -> RolloutOutcome {
    let region = TableRegion::new(
        prepared.column_candidates[choice.column_candidate]
            .set
            .iter()
            .copied(),
        prepared.row_candidates[choice.row_candidate]
            .set
            .iter()
            .copied(),
    );

    let answer_text =
        if options.verbosity_answer_coupling && VERBOSITY_LEVELS[choice.verbosity] < 48 {
            None
        } else {
            let subtable = extract_subtable(&prepared.task.table, &region)
                .expect("candidate regions bind to their table");
            strategy_answer(
                STRATEGIES[choice.strategy],
                prepared.task.question.kind(),
                &subtable,
            )
        };

    let serialized = serialize_region(&region, &prepared.task.table)
        .expect("candidate regions bind to their table");
    let response_length = options.base_response_length
        + VERBOSITY_LEVELS[choice.verbosity]
        + serialized.chars().count();

    let logp = rollout_logp(policy.params(), prepared, &choice);
    let logp_ref = rollout_logp(policy.reference(), prepared, &choice);

    RolloutOutcome {
        region,
        answer_text,
        response_length,
        log_probs: RolloutLogProbs {
            current: logp,
            old: logp,
            reference: logp_ref,
        },
        choice,
    }
}

/// Computes an answer string from the selected sub-table. Returns `None`
/// when the computation does not apply (empty selection, unparseable cells).
pub fn strategy_answer(
    strategy: Strategy,
    kind: QuestionKind,
    subtable: &Table,
) -> Option<String> {
    match strategy {
        Strategy::NoAnswer => None,
        Strategy::Correct => answer_on_column(kind, subtable, 0),
        // Aggregating over the trailing column instead of the leading one;
        // coincides with Correct on single-column regions.
        Strategy::WrongColumn => {
            let last = subtable.column_count().checked_sub(1)?;
            answer_on_column(kind, subtable, last)
        }
        Strategy::WrongAggregate => match kind {
            QuestionKind::CellLookup => Some(subtable.row_count().to_string()),
            QuestionKind::ColumnSum => aggregate(subtable, 0, Aggregate::Max),
            QuestionKind::ColumnMax => aggregate(subtable, 0, Aggregate::Sum),
            QuestionKind::FilteredCount => {
                if subtable.column_count() == 0 {
                    return None;
                }
                let distinct: std::collections::BTreeSet<&str> =
                    subtable.rows().iter().map(|row| row[0].as_str()).collect();
                Some(distinct.len().to_string())
            }
        },
        Strategy::WrongRow => {
            let last = subtable.row_count().checked_sub(1)?;
            let row = single_row_table(subtable, last);
            answer_on_column(kind, &row, 0)
        }
        Strategy::OffByOne => {
            let answer = answer_on_column(kind, subtable, 0)?;
            Some(match parse_numeric(&answer) {
                Some(value) => format!("{}", value + 1.0),
                None => format!("not the {answer} value here"),
            })
        }
    }
}

fn single_row_table(subtable: &Table, row: usize) -> Table {
    Table::new(
        subtable.columns().to_vec(),
        vec![subtable.rows()[row].clone()],
    )
    .expect("a single-row slice of a valid table is valid")
}

fn answer_on_column(kind: QuestionKind, subtable: &Table, column: usize) -> Option<String> {
    match kind {
        QuestionKind::CellLookup => subtable.cell(0, column).map(str::to_string),
        QuestionKind::ColumnSum => aggregate(subtable, column, Aggregate::Sum),
        QuestionKind::ColumnMax => aggregate(subtable, column, Aggregate::Max),
        QuestionKind::FilteredCount => {
            (subtable.column_count() > column).then(|| subtable.row_count().to_string())
        }
    }
}

enum Aggregate {
    Sum,
    Max,
}

fn aggregate(subtable: &Table, column: usize, op: Aggregate) -> Option<String> {
    if column >= subtable.column_count() {
        return None;
    }
    let mut values = Vec::with_capacity(subtable.row_count());
    for row in subtable.rows() {
        values.push(parse_numeric(&row[column])?);
    }
    let result = match op {
        Aggregate::Sum => values.iter().sum::<f64>(),
        Aggregate::Max => {
            if values.is_empty() {
                return None;
            }
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    };
    Some(format!("{result}"))
}
