//! Synthetic table-QA task generation.
//!
//! Each task is a small table plus a structured question, a gold region, and
//! a gold answer. The gold region is minimal by construction: its columns
//! are exactly the columns the answer is computed from, and its rows are
//! exactly the rows relevant to the question, so removing any element breaks
//! the computation. Gold answers are computed by scanning the full table at
//! generation time and re-verified by brute force in tests.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::reward::{parse_numeric, AnswerSpec};
use crate::table::{Table, TableRegion};

/// Key-column labels for row identities; extended with a numeric suffix when
/// a table has more rows than the pool.
const KEY_LABELS: [&str; 8] = [
    "alder", "birch", "cedar", "elm", "hazel", "maple", "oak", "pine",
];

/// Column-name pool; generated names take over past the pool.
const COLUMN_NAMES: [&str; 8] = [
    "name", "score", "count", "year", "rank", "size", "group", "grade",
];

/// Values for categorical columns; repeats are expected.
const CATEGORY_VALUES: [&str; 4] = ["red", "blue", "green", "gold"];

/// Bounds on generated table shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskShape {
    pub min_rows: usize,
    pub max_rows: usize,
    pub min_cols: usize,
    pub max_cols: usize,
}

impl Default for TaskShape {
    fn default() -> Self {
        TaskShape {
            min_rows: 3,
            max_rows: 8,
            min_cols: 3,
            max_cols: 8,
        }
    }
}

impl TaskShape {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_rows < 2 || self.min_cols < 2 {
            return Err("table shape needs at least 2 rows and 2 columns".into());
        }
        if self.max_rows < self.min_rows || self.max_cols < self.min_cols {
            return Err("table shape maxima must not be below the minima".into());
        }
        if self.max_rows > 64 || self.max_cols > 64 {
            return Err("table shape is capped at 64x64".into());
        }
        Ok(())
    }
}

/// An equality filter on a categorical column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub column: usize,
    pub value: String,
}

/// The structured question a task asks. The fields describe the question
/// itself (observable input), not the gold labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuestionSpec {
    /// The value of `target_column` in the row whose key column holds
    /// `key_value`.
    CellLookup {
        key_column: usize,
        key_value: String,
        target_column: usize,
    },
    /// The sum of `target_column` over the filtered rows.
    ColumnSum {
        target_column: usize,
        filter: Filter,
    },
    /// The maximum of `target_column` over all rows.
    ColumnMax { target_column: usize },
    /// The number of rows matching the filter.
    FilteredCount { filter: Filter },
}

/// The question family, used in reports and distribution control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionKind {
    CellLookup,
    ColumnSum,
    ColumnMax,
    FilteredCount,
}

impl QuestionSpec {
    pub fn kind(&self) -> QuestionKind {
        match self {
            QuestionSpec::CellLookup { .. } => QuestionKind::CellLookup,
            QuestionSpec::ColumnSum { .. } => QuestionKind::ColumnSum,
            QuestionSpec::ColumnMax { .. } => QuestionKind::ColumnMax,
            QuestionSpec::FilteredCount { .. } => QuestionKind::FilteredCount,
        }
    }
}

/// The columns an answer is computed from, derivable from the question
/// alone.
pub fn needed_columns(question: &QuestionSpec) -> BTreeSet<usize> {
    let column = match question {
        QuestionSpec::CellLookup { target_column, .. } => *target_column,
        QuestionSpec::ColumnSum { target_column, .. } => *target_column,
        QuestionSpec::ColumnMax { target_column } => *target_column,
        QuestionSpec::FilteredCount { filter } => filter.column,
    };
    BTreeSet::from([column])
}

/// The rows relevant to a question, derivable from the table and question
/// without gold labels: key matches for lookups, filter matches for sums and
/// counts, the argmax row for maxima.
pub fn relevant_rows(table: &Table, question: &QuestionSpec) -> BTreeSet<usize> {
    match question {
        QuestionSpec::CellLookup {
            key_column,
            key_value,
            ..
        } => (0..table.row_count())
            .filter(|&r| table.cell(r, *key_column) == Some(key_value.as_str()))
            .collect(),
        QuestionSpec::ColumnSum { filter, .. } => matching_rows(table, filter),
        QuestionSpec::ColumnMax { target_column } => {
            let mut best: Option<(usize, f64)> = None;
            for r in 0..table.row_count() {
                if let Some(value) = table.cell(r, *target_column).and_then(parse_numeric) {
                    if best.map(|(_, b)| value > b).unwrap_or(true) {
                        best = Some((r, value));
                    }
                }
            }
            best.map(|(r, _)| BTreeSet::from([r])).unwrap_or_default()
        }
        QuestionSpec::FilteredCount { filter } => matching_rows(table, filter),
    }
}

fn matching_rows(table: &Table, filter: &Filter) -> BTreeSet<usize> {
    (0..table.row_count())
        .filter(|&r| table.cell(r, filter.column) == Some(filter.value.as_str()))
        .collect()
}

/// One generated task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub id: String,
    pub table: Table,
    pub question_text: String,
    pub question: QuestionSpec,
    pub gold_region: TableRegion,
    pub gold_answer: AnswerSpec,
}

/// Generates `count` tasks deterministically from a seed; the same seed
/// always yields the same task list.
pub fn generate_tasks(seed: u64, count: usize, shape: &TaskShape) -> Vec<SyntheticTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|index| generate_task(&mut rng, index, shape))
        .collect()
}

fn generate_task(rng: &mut ChaCha8Rng, index: usize, shape: &TaskShape) -> SyntheticTask {
    let rows = rng.random_range(shape.min_rows..=shape.max_rows);
    let cols = rng.random_range(shape.min_cols..=shape.max_cols);
    let table = generate_table(rng, rows, cols);

    // Column 1 is always numeric; column 2, when present, is always
    // categorical, so every kind except FilteredCount is available on
    // 2-column tables.
    let numeric_columns: Vec<usize> = (1..cols)
        .filter(|&c| column_is_numeric(&table, c))
        .collect();
    let categorical_columns: Vec<usize> = (1..cols)
        .filter(|&c| !column_is_numeric(&table, c))
        .collect();

    // Sums and counts need a categorical column to filter on, so they only
    // appear on tables of three or more columns.
    let mut kinds = vec![QuestionKind::CellLookup, QuestionKind::ColumnMax];
    if !categorical_columns.is_empty() {
        kinds.push(QuestionKind::ColumnSum);
        kinds.push(QuestionKind::FilteredCount);
    }
    let kind = kinds[rng.random_range(0..kinds.len())];

    let pick_filter = |rng: &mut ChaCha8Rng| {
        let column = categorical_columns[rng.random_range(0..categorical_columns.len())];
        let value = table
            .cell(rng.random_range(0..rows), column)
            .unwrap()
            .to_string();
        Filter { column, value }
    };

    let question = match kind {
        QuestionKind::CellLookup => {
            let key_row = rng.random_range(0..rows);
            QuestionSpec::CellLookup {
                key_column: 0,
                key_value: table.cell(key_row, 0).unwrap().to_string(),
                target_column: rng.random_range(1..cols),
            }
        }
        QuestionKind::ColumnSum => QuestionSpec::ColumnSum {
            target_column: numeric_columns[rng.random_range(0..numeric_columns.len())],
            filter: pick_filter(rng),
        },
        QuestionKind::ColumnMax => QuestionSpec::ColumnMax {
            target_column: numeric_columns[rng.random_range(0..numeric_columns.len())],
        },
        QuestionKind::FilteredCount => QuestionSpec::FilteredCount {
            filter: pick_filter(rng),
        },
    };

    let gold_region = TableRegion::new(
        needed_columns(&question),
        relevant_rows(&table, &question),
    );
    let gold_answer = compute_gold_answer(&table, &question);
    let question_text = render_question(&table, &question);

    SyntheticTask {
        id: format!("task-{index:05}"),
        table,
        question_text,
        question,
        gold_region,
        gold_answer,
    }
}

fn generate_table(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Table {
    let mut columns = Vec::with_capacity(cols);
    let mut grid: Vec<Vec<String>> = vec![Vec::with_capacity(cols); rows];

    for c in 0..cols {
        let name = match COLUMN_NAMES.get(c) {
            Some(name) => name.to_string(),
            None => format!("field{c}"),
        };
        columns.push(name);

        if c == 0 {
            for (r, row) in grid.iter_mut().enumerate() {
                let label = if r < KEY_LABELS.len() {
                    KEY_LABELS[r].to_string()
                } else {
                    format!("{}{}", KEY_LABELS[r % KEY_LABELS.len()], r / KEY_LABELS.len())
                };
                row.push(label);
            }
        } else if c == 1 || (c != 2 && rng.random_bool(0.5)) {
            // Numeric column with distinct positive values: distinctness
            // gives ColumnMax a unique argmax, positivity keeps ColumnSum
            // minimal (dropping any row changes the sum).
            let values = distinct_values(rng, rows);
            for (row, value) in grid.iter_mut().zip(values) {
                row.push(value.to_string());
            }
        } else {
            for row in grid.iter_mut() {
                row.push(CATEGORY_VALUES[rng.random_range(0..CATEGORY_VALUES.len())].to_string());
            }
        }
    }

    Table::new(columns, grid).expect("generated tables satisfy the invariants")
}

fn distinct_values(rng: &mut ChaCha8Rng, count: usize) -> Vec<u32> {
    let mut values = Vec::with_capacity(count);
    while values.len() < count {
        let v = rng.random_range(1..=999);
        if !values.contains(&v) {
            values.push(v);
        }
    }
    values
}

fn column_is_numeric(table: &Table, column: usize) -> bool {
    (0..table.row_count()).all(|r| {
        table
            .cell(r, column)
            .map(|cell| parse_numeric(cell).is_some())
            .unwrap_or(false)
    })
}

/// Gold answers come from a direct scan of the full table, independent of
/// the sub-table computation path rollouts take.
fn compute_gold_answer(table: &Table, question: &QuestionSpec) -> AnswerSpec {
    match question {
        QuestionSpec::CellLookup {
            key_column,
            key_value,
            target_column,
        } => {
            let row = (0..table.row_count())
                .find(|&r| table.cell(r, *key_column) == Some(key_value.as_str()))
                .expect("lookup keys come from existing rows");
            let cell = table.cell(row, *target_column).unwrap();
            match parse_numeric(cell) {
                Some(value) => AnswerSpec::Numeric(value),
                None => AnswerSpec::Text(cell.to_string()),
            }
        }
        QuestionSpec::ColumnSum {
            target_column,
            filter,
        } => {
            let sum: f64 = matching_rows(table, filter)
                .into_iter()
                .map(|r| parse_numeric(table.cell(r, *target_column).unwrap()).unwrap())
                .sum();
            AnswerSpec::Numeric(sum)
        }
        QuestionSpec::ColumnMax { target_column } => {
            let max = (0..table.row_count())
                .filter_map(|r| parse_numeric(table.cell(r, *target_column).unwrap()))
                .fold(f64::NEG_INFINITY, f64::max);
            AnswerSpec::Numeric(max)
        }
        QuestionSpec::FilteredCount { filter } => {
            AnswerSpec::Numeric(matching_rows(table, filter).len() as f64)
        }
    }
}

fn render_question(table: &Table, question: &QuestionSpec) -> String {
    let col = |c: usize| table.columns()[c].as_str();
    match question {
        QuestionSpec::CellLookup {
            key_column,
            key_value,
            target_column,
        } => format!(
            "What is the {} of the row where {} is {}?",
            col(*target_column),
            col(*key_column),
            key_value
        ),
        QuestionSpec::ColumnSum {
            target_column,
            filter,
        } => format!(
            "What is the sum of {} for rows where {} is {}?",
            col(*target_column),
            col(filter.column),
            filter.value
        ),
        QuestionSpec::ColumnMax { target_column } => {
            format!("What is the maximum value in the {} column?", col(*target_column))
        }
        QuestionSpec::FilteredCount { filter } => format!(
            "How many rows have {} equal to {}?",
            col(filter.column),
            filter.value
        ),
    }
}

/// A region-axis candidate with its policy features.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub set: BTreeSet<usize>,
    /// `[recall, precision, size_ratio, is_full]` against the axis's
    /// relevant elements.
    pub features: [f64; 4],
}

/// A task plus the capped candidate lists the policy chooses regions from.
/// Candidate construction is deterministic from the task content.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTask {
    pub task: SyntheticTask,
    pub column_candidates: Vec<CandidateSet>,
    pub row_candidates: Vec<CandidateSet>,
}

impl PreparedTask {
    pub fn prepare(task: SyntheticTask) -> Self {
        let needed_cols = needed_columns(&task.question);
        let needed_rows = relevant_rows(&task.table, &task.question);
        let column_candidates =
            axis_candidates(&needed_cols, task.table.column_count());
        let row_candidates = axis_candidates(&needed_rows, task.table.row_count());
        PreparedTask {
            task,
            column_candidates,
            row_candidates,
        }
    }
}

/// Builds deduplicated candidates for one axis: the relevant set, the full
/// axis, over- and under-selections, the complement, disjoint singletons,
/// and the leading half of the axis.
fn axis_candidates(relevant: &BTreeSet<usize>, axis_size: usize) -> Vec<CandidateSet> {
    let full: BTreeSet<usize> = (0..axis_size).collect();
    let outside: Vec<usize> = (0..axis_size).filter(|i| !relevant.contains(i)).collect();

    let mut sets: Vec<BTreeSet<usize>> = vec![relevant.clone(), full.clone()];
    if let Some(&extra) = outside.first() {
        let mut widened = relevant.clone();
        widened.insert(extra);
        sets.push(widened.clone());
        if let Some(&second) = outside.get(1) {
            widened.insert(second);
            sets.push(widened);
            sets.push(BTreeSet::from([second]));
        }
        sets.push(BTreeSet::from([extra]));
        sets.push(outside.iter().copied().collect());
    }
    if relevant.len() >= 2 {
        let mut narrowed = relevant.clone();
        let last = *narrowed.iter().next_back().unwrap();
        narrowed.remove(&last);
        sets.push(narrowed);
    }
    if axis_size >= 2 {
        sets.push((0..axis_size / 2).collect());
        sets.push(BTreeSet::from([axis_size - 1]));
    }

    let mut out: Vec<CandidateSet> = Vec::new();
    for set in sets {
        if out.iter().any(|c| c.set == set) {
            continue;
        }
        let features = candidate_features(&set, relevant, axis_size);
        out.push(CandidateSet { set, features });
    }
    debug_assert!(out.len() >= 2, "an axis needs at least two candidates");
    out
}

fn candidate_features(
    set: &BTreeSet<usize>,
    relevant: &BTreeSet<usize>,
    axis_size: usize,
) -> [f64; 4] {
    let hit = set.intersection(relevant).count() as f64;
    let recall = if relevant.is_empty() {
        1.0
    } else {
        hit / relevant.len() as f64
    };
    let precision = if set.is_empty() {
        0.0
    } else {
        hit / set.len() as f64
    };
    let size_ratio = if axis_size == 0 {
        0.0
    } else {
        set.len() as f64 / axis_size as f64
    };
    let is_full = if set.len() == axis_size { 1.0 } else { 0.0 };
    [recall, precision, size_ratio, is_full]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::extract_subtable;

    #[test]
    fn same_seed_generates_identical_tasks() {
        let shape = TaskShape::default();
        let a = generate_tasks(7, 40, &shape);
        let b = generate_tasks(7, 40, &shape);
        assert_eq!(a, b);
        let c = generate_tasks(8, 40, &shape);
        assert_ne!(a, c);
    }

    #[test]
    fn shapes_stay_within_bounds() {
        let shape = TaskShape {
            min_rows: 2,
            max_rows: 5,
            min_cols: 2,
            max_cols: 4,
        };
        for task in generate_tasks(3, 100, &shape) {
            assert!(task.table.row_count() >= 2 && task.table.row_count() <= 5);
            assert!(task.table.column_count() >= 2 && task.table.column_count() <= 4);
        }
    }

    #[test]
    fn column_sum_gold_matches_construction() {
        for task in generate_tasks(11, 200, &TaskShape::default()) {
            if let QuestionSpec::ColumnSum { target_column, .. } = &task.question {
                let sub = extract_subtable(&task.table, &task.gold_region).unwrap();
                let sub_col = sub
                    .columns()
                    .iter()
                    .position(|c| c == &task.table.columns()[*target_column])
                    .unwrap();
                let sum: f64 = sub
                    .rows()
                    .iter()
                    .map(|row| parse_numeric(&row[sub_col]).unwrap())
                    .sum();
                assert_eq!(task.gold_answer, AnswerSpec::Numeric(sum));
            }
        }
    }

    #[test]
    fn filtered_count_brute_force_oracle() {
        // Exhaustive scan over all rows of the full table must reproduce the
        // gold count.
        for task in generate_tasks(13, 200, &TaskShape::default()) {
            if let QuestionSpec::FilteredCount { filter } = &task.question {
                let mut count = 0usize;
                for r in 0..task.table.row_count() {
                    if task.table.cell(r, filter.column) == Some(filter.value.as_str()) {
                        count += 1;
                    }
                }
                assert_eq!(task.gold_answer, AnswerSpec::Numeric(count as f64));
                assert_eq!(task.gold_region.rows().len(), count);
            }
        }
    }

    #[test]
    fn gold_region_is_minimal() {
        // Removing any row or column from the gold region must break the
        // recomputation of the gold answer from the sub-table. The checker
        // here recomputes answers semantically and independently.
        fn answer_from_region(task: &SyntheticTask, region: &TableRegion) -> Option<AnswerSpec> {
            let sub = extract_subtable(&task.table, region).ok()?;
            if sub.column_count() == 0 {
                return None;
            }
            match &task.question {
                QuestionSpec::CellLookup { .. } => {
                    let cell = sub.cell(0, 0)?;
                    if sub.row_count() != 1 || sub.column_count() != 1 {
                        return None;
                    }
                    Some(match parse_numeric(cell) {
                        Some(v) => AnswerSpec::Numeric(v),
                        None => AnswerSpec::Text(cell.to_string()),
                    })
                }
                QuestionSpec::ColumnSum { .. } => {
                    let mut sum = 0.0;
                    for row in sub.rows() {
                        sum += parse_numeric(&row[0])?;
                    }
                    Some(AnswerSpec::Numeric(sum))
                }
                QuestionSpec::ColumnMax { .. } => {
                    let mut best = f64::NEG_INFINITY;
                    for row in sub.rows() {
                        best = best.max(parse_numeric(&row[0])?);
                    }
                    (sub.row_count() > 0).then_some(AnswerSpec::Numeric(best))
                }
                QuestionSpec::FilteredCount { .. } => {
                    Some(AnswerSpec::Numeric(sub.row_count() as f64))
                }
            }
        }

        for task in generate_tasks(17, 150, &TaskShape::default()) {
            assert_eq!(
                answer_from_region(&task, &task.gold_region),
                Some(task.gold_answer.clone()),
                "gold region must recompute the gold answer for {}",
                task.id
            );
            for &row in task.gold_region.rows() {
                let mut rows = task.gold_region.rows().clone();
                rows.remove(&row);
                let smaller =
                    TableRegion::new(task.gold_region.columns().iter().copied(), rows);
                assert_ne!(
                    answer_from_region(&task, &smaller),
                    Some(task.gold_answer.clone()),
                    "dropping row {row} should break {}",
                    task.id
                );
            }
            for &col in task.gold_region.columns() {
                let mut cols = task.gold_region.columns().clone();
                cols.remove(&col);
                let smaller =
                    TableRegion::new(cols, task.gold_region.rows().iter().copied());
                assert_ne!(
                    answer_from_region(&task, &smaller),
                    Some(task.gold_answer.clone()),
                    "dropping column {col} should break {}",
                    task.id
                );
            }
        }
    }

    #[test]
    fn candidates_include_gold_and_are_distinct() {
        for task in generate_tasks(19, 100, &TaskShape::default()) {
            let needed_cols = needed_columns(&task.question);
            let needed_rows = relevant_rows(&task.table, &task.question);
            let prepared = PreparedTask::prepare(task);
            assert!(prepared.column_candidates.iter().any(|c| c.set == needed_cols));
            assert!(prepared.row_candidates.iter().any(|c| c.set == needed_rows));
            assert!(prepared.column_candidates.len() >= 2);
            assert!(prepared.row_candidates.len() >= 2);
            for window in [&prepared.column_candidates, &prepared.row_candidates] {
                for (i, a) in window.iter().enumerate() {
                    for b in &window[i + 1..] {
                        assert_ne!(a.set, b.set);
                    }
                }
            }
        }
    }

    #[test]
    fn gold_candidate_has_perfect_features() {
        for task in generate_tasks(29, 50, &TaskShape::default()) {
            let needed_rows = relevant_rows(&task.table, &task.question);
            let prepared = PreparedTask::prepare(task);
            let gold = prepared
                .row_candidates
                .iter()
                .find(|c| c.set == needed_rows)
                .unwrap();
            assert_eq!(gold.features[0], 1.0);
            assert_eq!(gold.features[1], if needed_rows.is_empty() { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn lookup_keys_are_unique() {
        for task in generate_tasks(31, 100, &TaskShape::default()) {
            if let QuestionSpec::CellLookup { .. } = task.question {
                assert_eq!(task.gold_region.rows().len(), 1);
                assert_eq!(task.gold_region.columns().len(), 1);
            }
        }
    }
}
