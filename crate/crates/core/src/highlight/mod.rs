//! Highlighters: produce a [`HighlightSet`] for a question over retrieved
//! documents via three interchangeable strategies, with fuzzy-match
//! snapping so every emitted span is an exact document substring.

pub mod extractive;
pub mod fuzzy;

pub use extractive::{highlight_extractive, ExtractiveEndpoint, ExtractiveError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Document, HighlightSet, Question, ScoredSpan, Span};
use crate::gateway::{
    ChatRequest, FieldKind, FieldSpec, Gateway, GatewayError, RoleTag, SchemaSpec,
    DEFAULT_STRUCTURED_RETRIES,
};
use crate::prompts;
use crate::textnorm::nfc;

/// Grounding parameters: the similarity floor a snapped span must reach,
/// the minimum span length in characters, and the span-count cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighlightLimits {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_min_span_chars")]
    pub min_span_chars: usize,
    #[serde(default = "default_max_spans")]
    pub max_spans: usize,
}

fn default_threshold() -> f64 {
    95.0
}

fn default_min_span_chars() -> usize {
    20
}

fn default_max_spans() -> usize {
    10
}

impl Default for HighlightLimits {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            min_span_chars: default_min_span_chars(),
            max_spans: default_max_spans(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LimitsError {
    #[error("threshold {0} is outside [0, 100]")]
    Threshold(f64),
    #[error("minimum span length must be at least 1")]
    MinSpan,
    #[error("maximum span count must be at least 1")]
    MaxSpans,
}

impl HighlightLimits {
    pub fn new(threshold: f64, min_span_chars: usize, max_spans: usize) -> Result<Self, LimitsError> {
        if !(0.0..=100.0).contains(&threshold) {
            return Err(LimitsError::Threshold(threshold));
        }
        if min_span_chars < 1 {
            return Err(LimitsError::MinSpan);
        }
        if max_spans < 1 {
            return Err(LimitsError::MaxSpans);
        }
        Ok(Self {
            threshold,
            min_span_chars,
            max_spans,
        })
    }
}

/// The three highlighter strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighlighterKind {
    Baseline,
    Structured,
    Extractive,
}

/// Normalized indel similarity in [0, 100] between NFC-normalized inputs.
/// Symmetric; 100 iff equal; 0 when exactly one side is empty.
pub fn similarity(a: &str, b: &str) -> f64 {
    fuzzy::indel_similarity(&nfc(a), &nfc(b))
}

/// Best in-band window of one document for a query, as a scored span.
/// The query is NFC-normalized; document text is NFC at construction.
pub fn best_span(doc: &Document, query: &str, limits: &HighlightLimits) -> Option<ScoredSpan> {
    let query = nfc(query);
    let m = fuzzy::best_span(&query, &doc.text, limits.threshold, limits.min_span_chars)?;
    let span = Span::new(doc.id.clone(), m.start, m.end);
    let text = span.slice(doc).expect("in-bounds by construction").to_owned();
    Some(ScoredSpan {
        span,
        text,
        score: m.score,
    })
}

/// A candidate span tagged with the index of its document in the retrieval
/// order, which drives deterministic merging and final ordering.
struct Candidate {
    doc_idx: usize,
    scored: ScoredSpan,
}

/// Snap free-text extracts onto the documents: per extract the best span
/// over all docs, ungrounded extracts dropped, true overlaps within a
/// document merged (union, max score), then truncation to the span cap
/// keeping the highest scores, ordered by (document order, start).
pub fn snap_extracts(
    docs: &[Document],
    extracts: &[String],
    limits: &HighlightLimits,
) -> HighlightSet {
    let mut candidates: Vec<Candidate> = Vec::new();
    for extract in extracts {
        let extract = extract.trim();
        if extract.is_empty() {
            continue;
        }
        // Best across documents: score first, then earlier document,
        // lower start, shorter span.
        let mut best: Option<Candidate> = None;
        for (doc_idx, doc) in docs.iter().enumerate() {
            let Some(scored) = best_span(doc, extract, limits) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    let cur = (b.scored.score, std::cmp::Reverse((b.doc_idx, b.scored.span.start, b.scored.span.len())));
                    let new = (scored.score, std::cmp::Reverse((doc_idx, scored.span.start, scored.span.len())));
                    new > cur
                }
            };
            if better {
                best = Some(Candidate { doc_idx, scored });
            }
        }
        if let Some(c) = best {
            candidates.push(c);
        }
    }
    assemble(candidates, docs, limits)
}

/// Merge, truncate, and order candidates into a valid highlight set.
/// Shared by the snapping path and the extractive strategy.
fn assemble(
    mut candidates: Vec<Candidate>,
    docs: &[Document],
    limits: &HighlightLimits,
) -> HighlightSet {
    // Merge true overlaps within each document: union the ranges, keep the
    // max score, and re-slice the text of the merged range.
    candidates.sort_by_key(|c| (c.doc_idx, c.scored.span.start, c.scored.span.end));
    let mut merged: Vec<Candidate> = Vec::with_capacity(candidates.len());
    for c in candidates {
        match merged.last_mut() {
            Some(prev)
                if prev.doc_idx == c.doc_idx && c.scored.span.start < prev.scored.span.end =>
            {
                prev.scored.span.end = prev.scored.span.end.max(c.scored.span.end);
                prev.scored.score = prev.scored.score.max(c.scored.score);
                let doc = &docs[prev.doc_idx];
                prev.scored.text = prev
                    .scored
                    .span
                    .slice(doc)
                    .expect("merged span stays in bounds")
                    .to_owned();
            }
            _ => merged.push(c),
        }
    }

    // Truncate to the cap keeping the highest scores, deterministically.
    if merged.len() > limits.max_spans {
        merged.sort_by(|a, b| {
            b.scored
                .score
                .partial_cmp(&a.scored.score)
                .expect("scores are finite")
                .then_with(|| (a.doc_idx, a.scored.span.start).cmp(&(b.doc_idx, b.scored.span.start)))
        });
        merged.truncate(limits.max_spans);
    }

    merged.sort_by_key(|c| (c.doc_idx, c.scored.span.start));
    HighlightSet::new(merged.into_iter().map(|c| c.scored).collect())
}

/// Split plain model output into candidate extracts: blank-line separated
/// blocks, trimmed, empties dropped.
pub fn split_extracts(output: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current = String::new();
    for line in output.lines() {
        if line.trim().is_empty() {
            if !current.trim().is_empty() {
                blocks.push(current.trim().to_owned());
            }
            current.clear();
        } else {
            if !current.is_empty() {
                current.push('\n');
            }
            current.push_str(line);
        }
    }
    if !current.trim().is_empty() {
        blocks.push(current.trim().to_owned());
    }
    blocks
}

/// Plain-prompt highlighter: ask for verbatim passages, split on blank
/// lines, snap. Gateway failures propagate.
pub fn highlight_baseline(
    q: &Question,
    docs: &[Document],
    limits: &HighlightLimits,
    gateway: &Gateway,
) -> Result<HighlightSet, GatewayError> {
    let req = ChatRequest::new(
        RoleTag::Highlighter,
        prompts::baseline_highlighter_messages(q, docs),
    );
    let completion = gateway.complete(&req)?;
    let extracts = split_extracts(&completion.text);
    Ok(snap_extracts(docs, &extracts, limits))
}

/// Output schema of the structured highlighter. The "answer" field exists
/// to make the model commit to an answer before selecting evidence; it is
/// discarded and never reaches the summarizer.
pub fn structured_highlighter_schema() -> SchemaSpec {
    SchemaSpec::new(
        "highlighting",
        vec![
            FieldSpec::required("answer", FieldKind::String),
            FieldSpec::required("text_extracts", FieldKind::StringList),
        ],
    )
    .expect("static schema is valid")
}

/// Structured-output highlighter. Structured-output exhaustion maps to an
/// empty set (treated as a decline upstream); other gateway errors
/// propagate.
pub fn highlight_structured(
    q: &Question,
    docs: &[Document],
    limits: &HighlightLimits,
    gateway: &Gateway,
) -> Result<HighlightSet, GatewayError> {
    let req = ChatRequest::new(
        RoleTag::Highlighter,
        prompts::structured_highlighter_messages(q, docs),
    );
    let schema = structured_highlighter_schema();
    match gateway.complete_structured(&req, &schema, DEFAULT_STRUCTURED_RETRIES) {
        Ok(result) => {
            let extracts: Vec<String> = result
                .fields
                .get("text_extracts")
                .and_then(|v| v.as_list())
                .map(|l| l.to_vec())
                .unwrap_or_default();
            Ok(snap_extracts(docs, &extracts, limits))
        }
        Err(GatewayError::StructuredOutputFailure { .. }) => Ok(HighlightSet::empty()),
        Err(e) => Err(e),
    }
}
