//! Core vocabulary shared by every other module: questions, documents,
//! spans, highlights, answers, and dataset records.
//!
//! Span offsets are Unicode scalar-value (character) offsets, never byte
//! offsets, so they survive serialization across implementations. Document
//! text is NFC-normalized on construction; all grounding checks are
//! byte-for-byte against that stored text.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textnorm::nfc;

/// The exact string every pipeline emits when it declines to answer.
/// Decline detection keys on this string, so it must never vary.
pub const DECLINE_MESSAGE: &str =
    "I cannot answer this question based on the available documents.";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub String);

impl QuestionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocumentId(pub String);

impl DocumentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("question text is empty after trimming")]
    EmptyQuestion,
    #[error("document {0} has empty text")]
    EmptyDocument(DocumentId),
}

/// A user question as submitted through the chat-style interface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub text: String,
}

impl Question {
    /// Creates a question, rejecting text that is empty after trimming.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, DomainError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(DomainError::EmptyQuestion);
        }
        Ok(Self {
            id: QuestionId::new(id),
            text,
        })
    }
}

/// A trusted source document from the knowledge base.
///
/// Text is NFC-normalized on construction so that span offsets and
/// byte-for-byte grounding checks are stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocumentId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_uri: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, DomainError> {
        let id = DocumentId::new(id);
        let text = text.into();
        if text.is_empty() {
            return Err(DomainError::EmptyDocument(id));
        }
        Ok(Self {
            id,
            text: nfc(&text).into_owned(),
            source_uri: None,
        })
    }

    pub fn with_source_uri(mut self, uri: impl Into<String>) -> Self {
        self.source_uri = Some(uri.into());
        self
    }

    /// Number of Unicode scalar values in the text; the exclusive upper
    /// bound for span offsets.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Anything that can resolve a document id to its stored document.
pub trait DocumentLookup {
    fn document(&self, id: &DocumentId) -> Option<&Document>;
}

impl DocumentLookup for BTreeMap<DocumentId, Document> {
    fn document(&self, id: &DocumentId) -> Option<&Document> {
        self.get(id)
    }
}

impl DocumentLookup for [Document] {
    fn document(&self, id: &DocumentId) -> Option<&Document> {
        self.iter().find(|d| &d.id == id)
    }
}

impl DocumentLookup for Vec<Document> {
    fn document(&self, id: &DocumentId) -> Option<&Document> {
        self.as_slice().document(id)
    }
}

impl<T: DocumentLookup + ?Sized> DocumentLookup for &T {
    fn document(&self, id: &DocumentId) -> Option<&Document> {
        (*self).document(id)
    }
}

/// Slice `text` by character offsets (start inclusive, end exclusive).
/// Returns `None` when the range is out of bounds or inverted.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start >= end {
        return None;
    }
    let mut byte_start = None;
    let mut byte_end = None;
    for (char_idx, (byte_idx, _)) in text.char_indices().enumerate() {
        if char_idx == start {
            byte_start = Some(byte_idx);
        }
        if char_idx == end {
            byte_end = Some(byte_idx);
            break;
        }
    }
    if byte_end.is_none() && end == text.chars().count() {
        byte_end = Some(text.len());
    }
    Some(&text[byte_start?..byte_end?])
}

/// A contiguous character range within one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub document_id: DocumentId,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(document_id: DocumentId, start: usize, end: usize) -> Self {
        Self {
            document_id,
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resolve the span against its document. `None` when out of bounds.
    pub fn slice<'a>(&self, doc: &'a Document) -> Option<&'a str> {
        if doc.id != self.document_id {
            return None;
        }
        char_slice(&doc.text, self.start, self.end)
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.document_id == other.document_id && self.start < other.end && other.start < self.end
    }
}

/// A span plus the text the highlighter matched and its similarity score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub span: Span,
    /// The exact text the span denotes, recorded at match time so the
    /// verbatim-grounding property can be re-checked later.
    pub text: String,
    /// Similarity in [0, 100].
    pub score: f64,
}

/// An ordered collection of scored spans produced by a highlighter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HighlightSet {
    pub spans: Vec<ScoredSpan>,
}

impl HighlightSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(spans: Vec<ScoredSpan>) -> Self {
        Self { spans }
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    /// Bare (document_id, start, end) triples, the wire form used in
    /// persisted results.
    pub fn wire_spans(&self) -> Vec<Span> {
        self.spans.iter().map(|s| s.span.clone()).collect()
    }

    /// Rebuild a highlight set from persisted wire spans by re-slicing the
    /// text from the store. Scores are 100 because re-sliced text matches
    /// the document exactly.
    pub fn resolve(
        spans: &[Span],
        store: &impl DocumentLookup,
    ) -> Result<Self, HighlightSetError> {
        let mut out = Vec::with_capacity(spans.len());
        for span in spans {
            let doc = store
                .document(&span.document_id)
                .ok_or_else(|| HighlightSetError::UnknownDocument(span.document_id.clone()))?;
            let text = span.slice(doc).ok_or(HighlightSetError::Violation(
                HighlightViolation::OutOfBounds { index: out.len() },
            ))?;
            out.push(ScoredSpan {
                span: span.clone(),
                text: text.to_owned(),
                score: 100.0,
            });
        }
        Ok(Self { spans: out })
    }
}

/// A single violated highlight-set rule; `validate_highlight_set` reports
/// the first one found in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HighlightViolation {
    #[error("span {index} is out of bounds for its document")]
    OutOfBounds { index: usize },
    #[error("span {index} is shorter than the minimum length {min}")]
    BelowMinLength { index: usize, min: usize },
    #[error("span {index} text does not match the document slice")]
    TextMismatch { index: usize },
    #[error("spans within document {document_id} are not sorted by start (span {index})")]
    NotSorted {
        document_id: DocumentId,
        index: usize,
    },
    #[error("span {index} overlaps the previous span in document {document_id}")]
    Overlap {
        document_id: DocumentId,
        index: usize,
    },
    #[error("{count} spans exceed the maximum of {max}")]
    OverCount { count: usize, max: usize },
}

/// Validation outcome: an unresolvable document id is distinct from an
/// invariant violation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HighlightSetError {
    #[error("unknown document id {0}")]
    UnknownDocument(DocumentId),
    #[error(transparent)]
    Violation(#[from] HighlightViolation),
}

/// Check every highlight-set invariant against the actual document texts.
///
/// Rules are checked in a fixed order: per span (ascending index) bounds,
/// minimum length, text match; then per document ordering and overlap;
/// finally the span-count cap.
pub fn validate_highlight_set(
    hs: &HighlightSet,
    store: &impl DocumentLookup,
    limits: &crate::highlight::HighlightLimits,
) -> Result<(), HighlightSetError> {
    // Resolve all documents first: an unknown id is a precondition
    // failure, not an invariant violation.
    for scored in &hs.spans {
        if store.document(&scored.span.document_id).is_none() {
            return Err(HighlightSetError::UnknownDocument(
                scored.span.document_id.clone(),
            ));
        }
    }

    for (index, scored) in hs.spans.iter().enumerate() {
        let doc = store.document(&scored.span.document_id).unwrap();
        let span = &scored.span;
        if span.start >= span.end || span.end > doc.char_len() {
            return Err(HighlightViolation::OutOfBounds { index }.into());
        }
        if span.len() < limits.min_span_chars {
            return Err(HighlightViolation::BelowMinLength {
                index,
                min: limits.min_span_chars,
            }
            .into());
        }
        let slice = span.slice(doc).expect("bounds checked above");
        if slice != scored.text {
            return Err(HighlightViolation::TextMismatch { index }.into());
        }
    }

    // Ordering and overlap within each document, in set order.
    let mut last_per_doc: BTreeMap<&DocumentId, (usize, &Span)> = BTreeMap::new();
    for (index, scored) in hs.spans.iter().enumerate() {
        let span = &scored.span;
        if let Some((_, prev)) = last_per_doc.get(&span.document_id) {
            if span.start < prev.start {
                return Err(HighlightViolation::NotSorted {
                    document_id: span.document_id.clone(),
                    index,
                }
                .into());
            }
            if span.start < prev.end {
                return Err(HighlightViolation::Overlap {
                    document_id: span.document_id.clone(),
                    index,
                }
                .into());
            }
        }
        last_per_doc.insert(&span.document_id, (index, span));
    }

    if hs.spans.len() > limits.max_spans {
        return Err(HighlightViolation::OverCount {
            count: hs.spans.len(),
            max: limits.max_spans,
        }
        .into());
    }

    Ok(())
}

/// The summarizer's structured reply: a guessed question plus the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizerOutput {
    pub guessed_question: String,
    pub answer: String,
}

/// Prompt/completion token counters accumulated over a pipeline run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub fn add(&mut self, other: TokenUsage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
    }
}

/// Final per-question response from a pipeline run.
///
/// Serializes to the results JSONL shape:
/// `{"id","pipeline","answer","declined","guessed_question",
///   "highlights":[{"document_id","start","end"}],"elapsed_s",
///   "prompt_tokens","completion_tokens"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineAnswer {
    #[serde(rename = "id")]
    pub question_id: QuestionId,
    #[serde(rename = "pipeline")]
    pub pipeline_name: String,
    pub answer: String,
    pub declined: bool,
    pub guessed_question: Option<String>,
    pub highlights: Option<Vec<Span>>,
    pub elapsed_s: f64,
    #[serde(flatten)]
    pub usage: TokenUsage,
}

impl PipelineAnswer {
    /// declined=true must carry the canonical message; declined=false must
    /// carry a non-empty answer.
    pub fn is_consistent(&self) -> bool {
        if self.declined {
            self.answer == DECLINE_MESSAGE
        } else {
            !self.answer.is_empty()
        }
    }
}

/// One dataset example: a question, its reference answer, and the source
/// document, with an optional human-selected gold passage.
///
/// Serializes to the normalized JSONL record shape:
/// `{"id","question","answer","gold_passage","document":{"id","text"},
///   "unanswerable"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: QuestionId,
    pub question: String,
    #[serde(rename = "answer")]
    pub reference_answer: String,
    pub gold_passage: Option<String>,
    pub document: Document,
    pub unanswerable: bool,
}

impl DatasetRecord {
    pub fn question(&self) -> Result<Question, DomainError> {
        Question::new(self.id.as_str(), self.question.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::highlight::HighlightLimits;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, text).unwrap()
    }

    fn scored(doc: &Document, start: usize, end: usize) -> ScoredSpan {
        let span = Span::new(doc.id.clone(), start, end);
        let text = span.slice(doc).unwrap().to_owned();
        ScoredSpan {
            span,
            text,
            score: 100.0,
        }
    }

    fn limits() -> HighlightLimits {
        HighlightLimits {
            threshold: 95.0,
            min_span_chars: 5,
            max_spans: 3,
        }
    }

    #[test]
    fn question_rejects_whitespace_only_text() {
        assert_eq!(Question::new("q1", "  \t\n"), Err(DomainError::EmptyQuestion));
        assert!(Question::new("q1", "What is this?").is_ok());
    }

    #[test]
    fn char_slice_handles_multibyte_text() {
        let text = "héllo wörld";
        assert_eq!(char_slice(text, 0, 5), Some("héllo"));
        assert_eq!(char_slice(text, 6, 11), Some("wörld"));
        assert_eq!(char_slice(text, 6, 12), None);
        assert_eq!(char_slice(text, 3, 3), None);
    }

    #[test]
    fn span_slices_exact_substring() {
        let d = doc("d1", "The quick brown fox jumps.");
        let span = Span::new(d.id.clone(), 4, 9);
        assert_eq!(span.slice(&d), Some("quick"));
    }

    #[test]
    fn validate_accepts_well_formed_set() {
        let d = doc("d1", "The quick brown fox jumps over the lazy dog.");
        let hs = HighlightSet::new(vec![scored(&d, 4, 15), scored(&d, 16, 26)]);
        let store = vec![d];
        assert_eq!(validate_highlight_set(&hs, &store, &limits()), Ok(()));
    }

    #[test]
    fn validate_rejects_out_of_bounds_end() {
        let d = doc("d1", "short text");
        let hs = HighlightSet::new(vec![ScoredSpan {
            span: Span::new(d.id.clone(), 0, 99),
            text: "short text".into(),
            score: 100.0,
        }]);
        let store = vec![d];
        assert_eq!(
            validate_highlight_set(&hs, &store, &limits()),
            Err(HighlightViolation::OutOfBounds { index: 0 }.into())
        );
    }

    #[test]
    fn validate_distinguishes_unknown_document() {
        let d = doc("d1", "some document text here");
        let hs = HighlightSet::new(vec![ScoredSpan {
            span: Span::new(DocumentId::new("nope"), 0, 8),
            text: "some doc".into(),
            score: 100.0,
        }]);
        let store = vec![d];
        assert_eq!(
            validate_highlight_set(&hs, &store, &limits()),
            Err(HighlightSetError::UnknownDocument(DocumentId::new("nope")))
        );
    }

    #[test]
    fn validate_rejects_overlap_and_over_count() {
        let d = doc("d1", "The quick brown fox jumps over the lazy dog.");
        let overlapping = HighlightSet::new(vec![scored(&d, 0, 10), scored(&d, 5, 15)]);
        let store = vec![d.clone()];
        assert!(matches!(
            validate_highlight_set(&overlapping, &store, &limits()),
            Err(HighlightSetError::Violation(HighlightViolation::Overlap { index: 1, .. }))
        ));

        let too_many = HighlightSet::new(vec![
            scored(&d, 0, 6),
            scored(&d, 7, 13),
            scored(&d, 14, 20),
            scored(&d, 21, 27),
        ]);
        assert!(matches!(
            validate_highlight_set(&too_many, &store, &limits()),
            Err(HighlightSetError::Violation(HighlightViolation::OverCount { count: 4, max: 3 }))
        ));
    }

    #[test]
    fn validate_rejects_text_mismatch() {
        let d = doc("d1", "The quick brown fox jumps.");
        let hs = HighlightSet::new(vec![ScoredSpan {
            span: Span::new(d.id.clone(), 4, 15),
            text: "QUICK BROWN".into(),
            score: 100.0,
        }]);
        let store = vec![d];
        assert_eq!(
            validate_highlight_set(&hs, &store, &limits()),
            Err(HighlightViolation::TextMismatch { index: 0 }.into())
        );
    }

    #[test]
    fn pipeline_answer_round_trips_through_wire_json() {
        let answer = PipelineAnswer {
            question_id: QuestionId::new("q7"),
            pipeline_name: "hs-structured".into(),
            answer: "Paris.".into(),
            declined: false,
            guessed_question: Some("What is the capital of France?".into()),
            highlights: Some(vec![Span::new(DocumentId::new("d1"), 3, 29)]),
            elapsed_s: 0.125,
            usage: TokenUsage {
                prompt_tokens: 42,
                completion_tokens: 7,
            },
        };
        let line = serde_json::to_string(&answer).unwrap();
        for key in [
            "\"id\"",
            "\"pipeline\"",
            "\"declined\"",
            "\"elapsed_s\"",
            "\"prompt_tokens\"",
            "\"completion_tokens\"",
        ] {
            assert!(line.contains(key), "missing {key} in {line}");
        }
        let back: PipelineAnswer = serde_json::from_str(&line).unwrap();
        assert_eq!(back, answer);
    }

    #[test]
    fn decline_consistency_rule() {
        let mut a = PipelineAnswer {
            question_id: QuestionId::new("q"),
            pipeline_name: "p".into(),
            answer: DECLINE_MESSAGE.into(),
            declined: true,
            guessed_question: None,
            highlights: None,
            elapsed_s: 0.0,
            usage: TokenUsage::default(),
        };
        assert!(a.is_consistent());
        a.answer = "something else".into();
        assert!(!a.is_consistent());
    }
}
