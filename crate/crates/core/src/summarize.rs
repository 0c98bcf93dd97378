//! The second pipeline stage: turn a highlight set into a final answer and
//! a guessed question — without ever receiving the user's question.
//!
//! The isolation property is enforced structurally: no function in this
//! module accepts a [`crate::domain::Question`], so the question cannot
//! reach a summarizer prompt through any code path here.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Document, DocumentId, DocumentLookup, HighlightSet, SummarizerOutput};
use crate::gateway::{
    ChatRequest, FieldKind, FieldSpec, Gateway, GatewayError, RoleTag, SchemaSpec,
    DEFAULT_STRUCTURED_RETRIES,
};
use crate::prompts;

/// Behavior switches for the summarizer stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizerConfig {
    /// Also show the full text of every referenced document, not just the
    /// highlighted excerpts. Off by default: it widens the summarizer's
    /// input surface and is shipped as a switch, not a recommendation.
    #[serde(default)]
    pub include_document_context: bool,
    /// Decline locally when the highlight set is empty instead of asking
    /// the model to answer from nothing.
    #[serde(default = "default_true")]
    pub decline_on_empty: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SummarizerConfig {
    fn default() -> Self {
        Self {
            include_document_context: false,
            decline_on_empty: true,
        }
    }
}

/// The summarizer either produces output or declines; a decline is a
/// normal outcome, not an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SummarizeOutcome {
    Summary(SummarizerOutput),
    Declined,
}

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("highlight references unknown document {0}")]
    UnknownDocument(DocumentId),
    #[error(transparent)]
    Gateway(GatewayError),
}

/// Output schema of the summarizer stage.
pub fn summarizer_schema() -> SchemaSpec {
    SchemaSpec::new(
        "summary",
        vec![
            FieldSpec::required("guessed_question", FieldKind::String),
            FieldSpec::required("answer", FieldKind::String),
        ],
    )
    .expect("static schema is valid")
}

/// Summarize a highlight set into an answer plus guessed question.
///
/// Declines when the set is empty (if configured), when structured output
/// exhausts its retries, or when the model returns a blank answer. Unknown
/// document references and terminal gateway failures are hard errors.
pub fn summarize(
    hs: &HighlightSet,
    store: &impl DocumentLookup,
    cfg: &SummarizerConfig,
    gateway: &Gateway,
) -> Result<SummarizeOutcome, SummarizeError> {
    if hs.is_empty() && cfg.decline_on_empty {
        return Ok(SummarizeOutcome::Declined);
    }

    // Resolve every referenced document up front; a dangling id is a
    // caller bug, not a model failure.
    let mut context_docs: Vec<&Document> = Vec::new();
    for scored in &hs.spans {
        let doc = store
            .document(&scored.span.document_id)
            .ok_or_else(|| SummarizeError::UnknownDocument(scored.span.document_id.clone()))?;
        if cfg.include_document_context && !context_docs.iter().any(|d| d.id == doc.id) {
            context_docs.push(doc);
        }
    }

    let excerpts: Vec<&str> = hs.spans.iter().map(|s| s.text.as_str()).collect();
    let req = ChatRequest::new(
        RoleTag::Summarizer,
        prompts::summarizer_messages(&excerpts, &context_docs),
    );
    match gateway.complete_structured(&req, &summarizer_schema(), DEFAULT_STRUCTURED_RETRIES) {
        Ok(result) => {
            let answer = result
                .fields
                .get("answer")
                .and_then(|v| v.as_str())
                .unwrap_or_default()
                .to_owned();
            let guessed_question = result
                .fields
                .get("guessed_question")
                .and_then(|v| v.as_str())
                .unwrap_or_default()
                .to_owned();
            // A blank answer cannot be surfaced as a non-declined response.
            if answer.trim().is_empty() {
                return Ok(SummarizeOutcome::Declined);
            }
            Ok(SummarizeOutcome::Summary(SummarizerOutput {
                guessed_question,
                answer,
            }))
        }
        Err(GatewayError::StructuredOutputFailure { .. }) => Ok(SummarizeOutcome::Declined),
        Err(e) => Err(SummarizeError::Gateway(e)),
    }
}
