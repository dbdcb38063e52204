//! Wire formats for datasets and transcripts: UTF-8 line-delimited records,
//! one object per line. The dataset schema is versioned via the
//! `schema_version` field; version 1 is the only one accepted.

use serde::{Deserialize, Serialize};
use tarpo_core::reward::AnswerSpec;
use tarpo_core::table::{
    canonicalize_region, parse_table, RawRegion, ReasoningKind, Table, TableError,
};

pub const SCHEMA_VERSION: u32 = 1;

/// One question over one table, with its gold region and answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub schema_version: u32,
    pub id: String,
    pub table: TablePayload,
    pub question: String,
    pub gold_answer: AnswerSpec,
    pub gold_region: RawRegion,
    pub reasoning_kind: ReasoningKind,
}

impl DatasetRecord {
    /// Schema checks beyond shape: version, table validity, region binding,
    /// and answer well-formedness.
    pub fn validate(&self) -> Result<Table, String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let table = self.table.to_table().map_err(|e| e.to_string())?;
        canonicalize_region(&self.gold_region, &table)
            .map_err(|e| format!("gold_region does not bind: {e}"))?;
        match &self.gold_answer {
            AnswerSpec::Numeric(v) if !v.is_finite() => {
                return Err("numeric gold answer must be finite".into());
            }
            AnswerSpec::List(items) if items.is_empty() => {
                return Err("list gold answer must not be empty".into());
            }
            _ => {}
        }
        Ok(table)
    }
}

/// A table on disk: either a markdown pipe table or a structured
/// `{columns, rows}` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TablePayload {
    Structured(Table),
    Markdown(String),
}

impl TablePayload {
    pub fn to_table(&self) -> Result<Table, TableError> {
        match self {
            TablePayload::Structured(table) => Ok(table.clone()),
            TablePayload::Markdown(text) => parse_table(text),
        }
    }
}

/// One model response to be scored or inspected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub id: String,
    pub text: String,
    /// Overrides the dataset record's reasoning kind when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_kind: Option<ReasoningKind>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_record_round_trips_with_markdown_table() {
        let json = r#"{"schema_version":1,"id":"r1","table":"| a | b |\n|---|---|\n| 1 | 2 |","question":"q","gold_answer":{"kind":"numeric","value":2},"gold_region":{"columns":["b"],"rows":[0]},"reasoning_kind":"TCoT"}"#;
        let record: DatasetRecord = serde_json::from_str(json).unwrap();
        let table = record.validate().unwrap();
        assert_eq!(table.column_count(), 2);
    }

    #[test]
    fn dataset_record_accepts_structured_table() {
        let json = r#"{"schema_version":1,"id":"r2","table":{"columns":["a"],"rows":[["1"]]},"question":"q","gold_answer":{"kind":"text","value":"x"},"gold_region":{"columns":[0],"rows":[]},"reasoning_kind":"DP"}"#;
        let record: DatasetRecord = serde_json::from_str(json).unwrap();
        record.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let json = r#"{"schema_version":1,"id":"r3","table":"| a |\n|---|","question":"q","gold_answer":{"kind":"text","value":"x"},"gold_region":{"columns":[],"rows":[]},"reasoning_kind":"DP","extra":1}"#;
        assert!(serde_json::from_str::<DatasetRecord>(json).is_err());
    }

    #[test]
    fn wrong_schema_version_fails_validation() {
        let json = r#"{"schema_version":2,"id":"r4","table":"| a |\n|---|","question":"q","gold_answer":{"kind":"text","value":"x"},"gold_region":{"columns":[],"rows":[]},"reasoning_kind":"DP"}"#;
        let record: DatasetRecord = serde_json::from_str(json).unwrap();
        assert!(record.validate().is_err());
    }

    #[test]
    fn unbound_gold_region_fails_validation() {
        let json = r#"{"schema_version":1,"id":"r5","table":"| a |\n|---|","question":"q","gold_answer":{"kind":"text","value":"x"},"gold_region":{"columns":["missing"],"rows":[]},"reasoning_kind":"DP"}"#;
        let record: DatasetRecord = serde_json::from_str(json).unwrap();
        assert!(record.validate().is_err());
    }
}
