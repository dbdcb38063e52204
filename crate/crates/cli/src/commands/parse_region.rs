//! Region-extraction diagnostics over transcripts: whether each response
//! declares a region, its normalized serialization, how many declarations
//! it holds, and where the first one sits relative to the answer marker.
//! Diagnoses, never fails: syntax errors are reported per transcript.

use std::path::Path;

use serde::Serialize;
use tarpo_core::table::{find_answer, find_region_declarations, serialize_raw_region};

use crate::error::CliError;
use crate::io::{read_jsonl, unix_timestamp, write_atomic};
use crate::records::TranscriptRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Status {
    Found,
    Absent,
    SyntaxError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Position {
    PreAnswer,
    PostAnswer,
    NoAnswerMarker,
}

#[derive(Debug, Serialize)]
struct ReportLine {
    record: &'static str,
    id: String,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    canonical: Option<String>,
    declaration_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    position: Option<Position>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct TallyLine {
    record: &'static str,
    transcripts: usize,
    found: usize,
    absent: usize,
    syntax_errors: usize,
    multiple_declarations: usize,
}

pub fn run(transcripts_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let transcripts: Vec<TranscriptRecord> = read_jsonl(transcripts_path)?;
    let mut lines = Vec::with_capacity(transcripts.len() + 1);
    let mut tally = TallyLine {
        record: "tally",
        transcripts: transcripts.len(),
        found: 0,
        absent: 0,
        syntax_errors: 0,
        multiple_declarations: 0,
    };

    for transcript in &transcripts {
        let declarations = find_region_declarations(&transcript.text);
        let parsed_count = declarations.iter().filter(|d| d.is_ok()).count();
        let line = match declarations.into_iter().next() {
            None => {
                tally.absent += 1;
                ReportLine {
                    record: "parse-region",
                    id: transcript.id.clone(),
                    status: Status::Absent,
                    canonical: None,
                    declaration_count: 0,
                    position: None,
                    error: None,
                }
            }
            Some(Err(e)) => {
                tally.syntax_errors += 1;
                ReportLine {
                    record: "parse-region",
                    id: transcript.id.clone(),
                    status: Status::SyntaxError,
                    canonical: None,
                    declaration_count: parsed_count,
                    position: None,
                    error: Some(e.to_string()),
                }
            }
            Some(Ok(first)) => {
                tally.found += 1;
                if parsed_count > 1 {
                    tally.multiple_declarations += 1;
                }
                let position = match find_answer(&transcript.text) {
                    None => Position::NoAnswerMarker,
                    Some((marker_pos, _)) => {
                        if first.span.start < marker_pos {
                            Position::PreAnswer
                        } else {
                            Position::PostAnswer
                        }
                    }
                };
                ReportLine {
                    record: "parse-region",
                    id: transcript.id.clone(),
                    status: Status::Found,
                    canonical: Some(serialize_raw_region(&first.region)),
                    declaration_count: parsed_count,
                    position: Some(position),
                    error: None,
                }
            }
        };
        lines.push(serde_json::to_string(&line).expect("report lines serialize"));
    }

    lines.push(serde_json::to_string(&tally).expect("the tally serializes"));
    let body = lines.join("\n") + "\n";
    print!("{body}");
    if let Some(dir) = out {
        let header = serde_json::json!({
            "record": "header",
            "created_unix": unix_timestamp(),
            "command": "parse-region",
        });
        write_atomic(
            &dir.join("parse_region_report.jsonl"),
            &format!("{header}\n{body}"),
        )?;
    }
    Ok(())
}
