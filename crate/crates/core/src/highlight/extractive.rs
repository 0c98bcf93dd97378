//! Extractive span-prediction strategy: an external service returns
//! character spans with confidences; spans are filtered, validated against
//! the document, and assembled like any other highlight candidates.
//!
//! Wire contract: `POST {base}/extract` with JSON
//! `{"question": str, "document": str, "max_spans": int}`; the response is
//! `{"spans": [{"start": int, "end": int, "confidence": float}]}` with
//! character offsets into the document text.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Document, HighlightSet, Question, ScoredSpan, Span};
use crate::highlight::{assemble, Candidate, HighlightLimits};

/// Connection settings for the span-prediction service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractiveEndpoint {
    pub base_url: String,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    /// Spans below this confidence are dropped.
    #[serde(default = "default_confidence_floor")]
    pub confidence_floor: f64,
}

fn default_timeout_s() -> u64 {
    30
}

fn default_confidence_floor() -> f64 {
    0.3
}

#[derive(Debug, Error)]
pub enum ExtractiveError {
    /// The service could not be reached or did not answer successfully;
    /// pipelines surface this as a hard error, not a decline.
    #[error("extractive service unavailable: {message}")]
    Unavailable { message: String },
    #[error("extractive service protocol error: {message}")]
    Protocol { message: String },
}

#[derive(Debug, Deserialize)]
struct WireSpan {
    start: usize,
    end: usize,
    confidence: f64,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    spans: Vec<WireSpan>,
}

fn fetch(
    ep: &ExtractiveEndpoint,
    question: &str,
    doc: &Document,
    max_spans: usize,
) -> Result<Vec<WireSpan>, ExtractiveError> {
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs(ep.timeout_s))
        .build();
    let url = format!("{}/extract", ep.base_url.trim_end_matches('/'));
    let body = serde_json::json!({
        "question": question,
        "document": doc.text,
        "max_spans": max_spans,
    });
    let response = agent
        .post(&url)
        .set("Content-Type", "application/json")
        .send_string(&body.to_string())
        .map_err(|e| ExtractiveError::Unavailable {
            message: e.to_string(),
        })?;
    let text = response
        .into_string()
        .map_err(|e| ExtractiveError::Protocol {
            message: format!("unreadable body: {e}"),
        })?;
    let parsed: WireResponse =
        serde_json::from_str(&text).map_err(|e| ExtractiveError::Protocol {
            message: format!("unexpected response shape: {e}"),
        })?;
    Ok(parsed.spans)
}

/// Turn one document's wire spans into validated candidates: drop spans
/// below the confidence floor, out of bounds, or shorter than the minimum
/// length; score is 100·confidence.
fn collect_candidates(
    doc: &Document,
    doc_idx: usize,
    spans: Vec<WireSpan>,
    limits: &HighlightLimits,
    floor: f64,
) -> Vec<Candidate> {
    let char_len = doc.char_len();
    spans
        .into_iter()
        .filter(|w| w.confidence >= floor)
        .filter(|w| w.start < w.end && w.end <= char_len)
        .filter(|w| w.end - w.start >= limits.min_span_chars)
        .map(|w| {
            let span = Span::new(doc.id.clone(), w.start, w.end);
            let text = span.slice(doc).expect("bounds checked").to_owned();
            Candidate {
                doc_idx,
                scored: ScoredSpan {
                    span,
                    text,
                    score: (100.0 * w.confidence).clamp(0.0, 100.0),
                },
            }
        })
        .collect()
}

/// Query the span-prediction service for every document and assemble the
/// results into a valid highlight set.
pub fn highlight_extractive(
    q: &Question,
    docs: &[Document],
    limits: &HighlightLimits,
    ep: &ExtractiveEndpoint,
) -> Result<HighlightSet, ExtractiveError> {
    let mut candidates = Vec::new();
    for (doc_idx, doc) in docs.iter().enumerate() {
        let spans = fetch(ep, &q.text, doc, limits.max_spans)?;
        candidates.extend(collect_candidates(
            doc,
            doc_idx,
            spans,
            limits,
            ep.confidence_floor,
        ));
    }
    Ok(assemble(candidates, docs, limits))
}
