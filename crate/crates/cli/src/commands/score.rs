//! Offline transcript scoring: per-record region and answer rewards, the
//! mixed reward at a given weight, aggregate means, and a per-reasoning-kind
//! breakdown. Scoring anomalies (absent or unbindable regions, missing
//! answers) score zero on the affected part and never fail the command.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use tarpo_core::reward::{answer_reward, missing_region_reward, mixed_reward, region_reward};
use tarpo_core::table::{
    canonicalize_region, find_answer, parse_region_from_text, Table, TableRegion,
};

use crate::config::ResolvedConfig;
use crate::error::CliError;
use crate::io::{read_jsonl, unix_timestamp, write_atomic};
use crate::records::{DatasetRecord, TranscriptRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RegionStatus {
    Found,
    Absent,
    SyntaxError,
    /// Parsed but does not bind to the record's table.
    InvalidRegion,
}

#[derive(Debug, Serialize)]
struct ScoreLine {
    record: &'static str,
    id: String,
    reasoning_kind: String,
    region_status: RegionStatus,
    region_reward: f64,
    answer_reward: f64,
    mixed_reward: f64,
}

#[derive(Debug, Default, Serialize)]
struct KindAggregate {
    count: usize,
    mean_region_reward: f64,
    mean_answer_reward: f64,
    mean_mixed_reward: f64,
}

#[derive(Debug, Serialize)]
struct AggregateLine {
    record: &'static str,
    alpha: f64,
    count: usize,
    mean_region_reward: f64,
    mean_answer_reward: f64,
    mean_mixed_reward: f64,
    by_reasoning_kind: BTreeMap<String, KindAggregate>,
}

pub fn run(
    dataset_path: &Path,
    transcripts_path: &Path,
    config: &ResolvedConfig,
    alpha_override: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let alpha = alpha_override.unwrap_or(config.train.reward.gamma);
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CliError::Config(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }

    let dataset: Vec<DatasetRecord> = read_jsonl(dataset_path)?;
    let mut by_id: BTreeMap<&str, (&DatasetRecord, Table, TableRegion)> = BTreeMap::new();
    for (index, record) in dataset.iter().enumerate() {
        let table = record
            .validate()
            .map_err(|message| CliError::schema(dataset_path, index + 1, message))?;
        let gold_region = canonicalize_region(&record.gold_region, &table)
            .expect("validate() already bound the gold region");
        if by_id
            .insert(record.id.as_str(), (record, table, gold_region))
            .is_some()
        {
            return Err(CliError::schema(
                dataset_path,
                index + 1,
                format!("duplicate dataset id {:?}", record.id),
            ));
        }
    }

    let transcripts: Vec<TranscriptRecord> = read_jsonl(transcripts_path)?;
    let mut lines = Vec::with_capacity(transcripts.len() + 1);
    let mut sums = (0.0, 0.0, 0.0);
    let mut by_kind: BTreeMap<String, (usize, f64, f64, f64)> = BTreeMap::new();

    for transcript in &transcripts {
        let (record, table, gold_region) = by_id
            .get(transcript.id.as_str())
            .ok_or_else(|| CliError::MissingRecord(transcript.id.clone()))?;

        let (status, r_t) = match parse_region_from_text(&transcript.text) {
            Err(_) => (RegionStatus::SyntaxError, missing_region_reward()),
            Ok(None) => (RegionStatus::Absent, missing_region_reward()),
            Ok(Some(parsed)) => match canonicalize_region(&parsed.region, table) {
                Err(_) => (RegionStatus::InvalidRegion, missing_region_reward()),
                Ok(region) => (RegionStatus::Found, region_reward(&region, gold_region)),
            },
        };

        let answer = find_answer(&transcript.text).map(|(_, a)| a);
        let r_a = answer_reward(
            answer.as_deref().unwrap_or(""),
            &record.gold_answer,
            &config.train.reward,
        );
        let mixed = mixed_reward(r_t, r_a, alpha);

        let kind = transcript
            .reasoning_kind
            .unwrap_or(record.reasoning_kind)
            .to_string();
        sums.0 += r_t;
        sums.1 += r_a;
        sums.2 += mixed;
        let entry = by_kind.entry(kind.clone()).or_default();
        entry.0 += 1;
        entry.1 += r_t;
        entry.2 += r_a;
        entry.3 += mixed;

        lines.push(serde_json::to_string(&ScoreLine {
            record: "score",
            id: transcript.id.clone(),
            reasoning_kind: kind,
            region_status: status,
            region_reward: r_t,
            answer_reward: r_a,
            mixed_reward: mixed,
        })
        .expect("score lines serialize"));
    }

    let count = transcripts.len();
    let denominator = count.max(1) as f64;
    let aggregate = AggregateLine {
        record: "aggregate",
        alpha,
        count,
        mean_region_reward: sums.0 / denominator,
        mean_answer_reward: sums.1 / denominator,
        mean_mixed_reward: sums.2 / denominator,
        by_reasoning_kind: by_kind
            .into_iter()
            .map(|(kind, (n, rt, ra, mixed))| {
                (
                    kind,
                    KindAggregate {
                        count: n,
                        mean_region_reward: rt / n as f64,
                        mean_answer_reward: ra / n as f64,
                        mean_mixed_reward: mixed / n as f64,
                    },
                )
            })
            .collect(),
    };
    lines.push(serde_json::to_string(&aggregate).expect("aggregate serializes"));

    let body = lines.join("\n") + "\n";
    print!("{body}");
    if let Some(dir) = out {
        let header = serde_json::json!({
            "record": "header",
            "created_unix": unix_timestamp(),
            "command": "score",
            "alpha": alpha,
            "config": config,
        });
        let path = dir.join("score_report.jsonl");
        write_atomic(&path, &format!("{header}\n{body}"))?;
    }
    Ok(())
}
