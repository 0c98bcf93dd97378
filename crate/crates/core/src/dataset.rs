//! Dataset ingestion from JSONL files in three shapes, with per-record
//! validation, quarantine, and round-trippable writers.
//!
//! A malformed *line* (not valid JSON for the declared shape) is a hard
//! error naming the line. A well-formed record that fails a semantic check
//! (empty fields, gold passage not found in the document, duplicate id) is
//! quarantined with a reason; when more than 1% of records end up
//! quarantined the load fails and reports all of them.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DatasetRecord, Document, QuestionId};
use crate::textnorm::nfc;

/// The JSONL shapes the loader understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    /// `{"question_id","question","answer","long_answer","document_id",
    ///   "document_extracted"}` — unanswerability is derived from the
    ///   configurable [`UnanswerableRule`].
    Repliqa,
    /// `{"id","body","ideal_answer","document_id","document_text"}` — no
    /// gold passage exists in this shape, and every record is answerable.
    Bioasq,
    /// The native [`DatasetRecord`] serialization.
    Normalized,
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceFormat::Repliqa => "repliqa",
            SourceFormat::Bioasq => "bioasq",
            SourceFormat::Normalized => "normalized",
        })
    }
}

impl std::str::FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "repliqa" => Ok(SourceFormat::Repliqa),
            "bioasq" => Ok(SourceFormat::Bioasq),
            "normalized" => Ok(SourceFormat::Normalized),
            other => Err(format!(
                "unknown dataset format {other:?}; expected repliqa, bioasq, or normalized"
            )),
        }
    }
}

/// How unanswerability is detected in sources that mark it by convention
/// rather than a boolean field: the record is unanswerable iff the named
/// source field equals the given string exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnanswerableRule {
    pub field: String,
    pub equals: String,
}

impl Default for UnanswerableRule {
    fn default() -> Self {
        Self {
            field: "answer".to_owned(),
            equals: "The answer is not found in the document.".to_owned(),
        }
    }
}

/// A record that parsed but failed a semantic check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedRecord {
    pub line: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub reason: String,
}

/// A successful load: the usable records plus whatever was quarantined
/// (at most 1% of the parsed records).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub records: Vec<DatasetRecord>,
    pub quarantined: Vec<QuarantinedRecord>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: not a valid {format} record: {reason}")]
    Parse {
        line: usize,
        format: SourceFormat,
        reason: String,
    },
    #[error(
        "{quarantined} of {total} records were quarantined (more than 1%); \
         first reason: line {first_line}: {first_reason}"
    )]
    QuarantineExcess {
        quarantined: usize,
        total: usize,
        first_line: usize,
        first_reason: String,
        details: Vec<QuarantinedRecord>,
    },
    #[error("dataset contains no records")]
    Empty,
}

#[derive(Debug, Serialize, Deserialize)]
struct RepliqaWire {
    question_id: String,
    question: String,
    answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    long_answer: Option<String>,
    document_id: String,
    document_extracted: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct BioasqWire {
    id: String,
    body: String,
    ideal_answer: String,
    document_id: String,
    document_text: String,
}

/// Parse one line of the declared shape into the pieces common to all
/// formats: (id, question, answer, gold, doc_id, doc_text, unanswerable).
fn parse_line(
    line: &str,
    fmt: SourceFormat,
    rule: &UnanswerableRule,
    line_no: usize,
) -> Result<DatasetRecord, DatasetError> {
    let parse_err = |reason: String| DatasetError::Parse {
        line: line_no,
        format: fmt,
        reason,
    };
    match fmt {
        SourceFormat::Normalized => {
            serde_json::from_str::<DatasetRecord>(line).map_err(|e| parse_err(e.to_string()))
        }
        SourceFormat::Repliqa => {
            let value: serde_json::Value =
                serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
            let unanswerable = value
                .get(&rule.field)
                .and_then(|v| v.as_str())
                .is_some_and(|v| v == rule.equals);
            let w: RepliqaWire =
                serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
            // Unanswerable records carry the no-answer convention in
            // long_answer too; no usable gold passage exists for them.
            let gold_passage = if unanswerable {
                None
            } else {
                w.long_answer
                    .filter(|g| !g.trim().is_empty())
                    .map(|g| nfc(&g).into_owned())
            };
            Ok(DatasetRecord {
                id: QuestionId::new(w.question_id),
                question: w.question,
                reference_answer: w.answer,
                gold_passage,
                document: Document::new(w.document_id, w.document_extracted)
                    .map_err(|e| parse_err(e.to_string()))?,
                unanswerable,
            })
        }
        SourceFormat::Bioasq => {
            let w: BioasqWire =
                serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
            Ok(DatasetRecord {
                id: QuestionId::new(w.id),
                question: w.body,
                reference_answer: w.ideal_answer,
                gold_passage: None,
                document: Document::new(w.document_id, w.document_text)
                    .map_err(|e| parse_err(e.to_string()))?,
                unanswerable: false,
            })
        }
    }
}

/// Semantic check applied after parsing; `None` means the record is good.
fn validation_reason(record: &DatasetRecord, seen: &BTreeSet<QuestionId>) -> Option<String> {
    if record.id.as_str().trim().is_empty() {
        return Some("empty question id".to_owned());
    }
    if seen.contains(&record.id) {
        return Some(format!("duplicate question id {}", record.id));
    }
    if record.question.trim().is_empty() {
        return Some("empty question text".to_owned());
    }
    if record.document.text.trim().is_empty() {
        return Some("empty document text".to_owned());
    }
    if let Some(gold) = &record.gold_passage {
        if !record.document.text.contains(gold.as_str()) {
            return Some(format!(
                "gold passage is not a substring of document {}",
                record.document.id
            ));
        }
    }
    None
}

/// Parse a whole JSONL dataset from text. See the module docs for the
/// error/quarantine split.
pub fn parse_dataset(
    text: &str,
    fmt: SourceFormat,
    rule: &UnanswerableRule,
) -> Result<LoadOutcome, DatasetError> {
    let mut records = Vec::new();
    let mut quarantined = Vec::new();
    let mut seen = BTreeSet::new();
    let mut total = 0usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let record = parse_line(line, fmt, rule, idx + 1)?;
        match validation_reason(&record, &seen) {
            None => {
                seen.insert(record.id.clone());
                records.push(record);
            }
            Some(reason) => quarantined.push(QuarantinedRecord {
                line: idx + 1,
                id: Some(record.id.as_str().to_owned()),
                reason,
            }),
        }
    }
    if total == 0 {
        return Err(DatasetError::Empty);
    }
    // Strictly more than 1% quarantined fails the load.
    if quarantined.len() * 100 > total {
        let first = quarantined[0].clone();
        return Err(DatasetError::QuarantineExcess {
            quarantined: quarantined.len(),
            total,
            first_line: first.line,
            first_reason: first.reason,
            details: quarantined,
        });
    }
    Ok(LoadOutcome {
        records,
        quarantined,
    })
}

/// [`parse_dataset`] over a file.
pub fn load_dataset(
    path: &Path,
    fmt: SourceFormat,
    rule: &UnanswerableRule,
) -> Result<LoadOutcome, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, fmt, rule)
}

/// Serialize records to normalized JSONL, one record per line, trailing
/// newline included when non-empty.
pub fn write_normalized(records: &[DatasetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record is serializable"));
        out.push('\n');
    }
    out
}

/// Serialize records to RepliQA-shaped JSONL. Faithful for datasets that
/// follow the unanswerable-answer convention: the `unanswerable` flag is
/// not a source field there, so it survives a round trip only when it can
/// be re-derived from the answer text by `rule`.
pub fn write_repliqa(records: &[DatasetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let wire = RepliqaWire {
            question_id: r.id.as_str().to_owned(),
            question: r.question.clone(),
            answer: r.reference_answer.clone(),
            long_answer: r.gold_passage.clone(),
            document_id: r.document.id.as_str().to_owned(),
            document_extracted: r.document.text.clone(),
        };
        out.push_str(&serde_json::to_string(&wire).expect("record is serializable"));
        out.push('\n');
    }
    out
}
