//! Question answering over trusted documents with verbatim highlighting
//! and a question-blind summarizer, plus the evaluation kit and the
//! tool-call security harness built around that pipeline.

pub mod dataset;
pub mod domain;
pub mod eval;
pub mod gateway;
pub mod highlight;
pub mod pipeline;
pub mod prompts;
pub mod security;
pub mod summarize;
pub mod textnorm;

pub use domain::{
    DatasetRecord, Document, DocumentId, DocumentLookup, HighlightSet, PipelineAnswer, Question,
    QuestionId, ScoredSpan, Span, SummarizerOutput, TokenUsage, DECLINE_MESSAGE,
};
pub use gateway::{Gateway, GatewayError, RoleTag};
pub use highlight::{HighlightLimits, HighlighterKind};
