//! End-to-end orchestration: retrieval, then either the highlight &
//! summarize path or plain single-prompt RAG, producing [`PipelineAnswer`]s.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    DatasetRecord, Document, DocumentId, DocumentLookup, PipelineAnswer, Question, QuestionId,
    TokenUsage, DECLINE_MESSAGE,
};
use crate::eval::tokens::normalize_tokens;
use crate::gateway::{ChatRequest, Gateway, GatewayError, RoleTag};
use crate::highlight::{
    highlight_baseline, highlight_extractive, highlight_structured, ExtractiveEndpoint,
    ExtractiveError, HighlightLimits, HighlighterKind,
};
use crate::prompts;
use crate::summarize::{summarize, SummarizeError, SummarizeOutcome, SummarizerConfig};

/// In-memory knowledge base: documents, a token index for lexical
/// retrieval, and the question → document association from the dataset.
#[derive(Debug, Clone, Default)]
pub struct DocumentStore {
    docs: Vec<Document>,
    by_id: BTreeMap<DocumentId, usize>,
    token_sets: Vec<BTreeSet<String>>,
    assoc: BTreeMap<QuestionId, Vec<DocumentId>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("document id {0} already stored with different text")]
    ConflictingDocument(DocumentId),
}

impl DocumentStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a store from dataset records: every record's document is
    /// inserted (re-insertion of an identical document is a no-op) and
    /// associated with the record's question.
    pub fn from_records(records: &[DatasetRecord]) -> Result<Self, StoreError> {
        let mut store = Self::new();
        for r in records {
            store.insert(r.document.clone())?;
            store.associate(r.id.clone(), r.document.id.clone());
        }
        Ok(store)
    }

    /// Insert a document. Identical re-insertions are accepted; the same
    /// id with different text is a conflict.
    pub fn insert(&mut self, doc: Document) -> Result<(), StoreError> {
        if let Some(&idx) = self.by_id.get(&doc.id) {
            if self.docs[idx].text != doc.text {
                return Err(StoreError::ConflictingDocument(doc.id));
            }
            return Ok(());
        }
        self.by_id.insert(doc.id.clone(), self.docs.len());
        self.token_sets
            .push(normalize_tokens(&doc.text).into_iter().collect());
        self.docs.push(doc);
        Ok(())
    }

    pub fn associate(&mut self, question: QuestionId, document: DocumentId) {
        let entry = self.assoc.entry(question).or_default();
        if !entry.contains(&document) {
            entry.push(document);
        }
    }

    pub fn get(&self, id: &DocumentId) -> Option<&Document> {
        self.by_id.get(id).map(|&idx| &self.docs[idx])
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn associated(&self, question: &QuestionId) -> Option<&[DocumentId]> {
        self.assoc.get(question).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

impl DocumentLookup for DocumentStore {
    fn document(&self, id: &DocumentId) -> Option<&Document> {
        self.get(id)
    }
}

/// Which family a pipeline belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    Vanilla,
    Hs,
}

/// How documents are retrieved for a question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverKind {
    /// Return the dataset-associated document(s) for the question.
    #[default]
    Passthrough,
    /// Top-k documents by normalized-token overlap with the question.
    Lexical,
}

fn default_k() -> usize {
    1
}

/// Full description of one runnable pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub name: String,
    pub kind: PipelineKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlighter: Option<HighlighterKind>,
    #[serde(default)]
    pub limits: HighlightLimits,
    #[serde(default)]
    pub summarizer: SummarizerConfig,
    #[serde(default)]
    pub retriever: RetrieverKind,
    #[serde(default = "default_k")]
    pub k: usize,
}

impl PipelineSpec {
    pub fn hs(name: impl Into<String>, highlighter: HighlighterKind) -> Self {
        Self {
            name: name.into(),
            kind: PipelineKind::Hs,
            highlighter: Some(highlighter),
            limits: HighlightLimits::default(),
            summarizer: SummarizerConfig::default(),
            retriever: RetrieverKind::Passthrough,
            k: 1,
        }
    }

    pub fn vanilla(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: PipelineKind::Vanilla,
            highlighter: None,
            limits: HighlightLimits::default(),
            summarizer: SummarizerConfig::default(),
            retriever: RetrieverKind::Passthrough,
            k: 1,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.kind == PipelineKind::Hs && self.highlighter.is_none() {
            return Err(PipelineError::Misconfigured {
                pipeline: self.name.clone(),
                reason: "hs pipelines require a highlighter".into(),
            });
        }
        if self.k == 0 {
            return Err(PipelineError::Misconfigured {
                pipeline: self.name.clone(),
                reason: "retrieval depth k must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Shared execution environment: the model gateway and, when configured,
/// the extractive span-prediction endpoint.
#[derive(Clone)]
pub struct Runtime {
    pub gateway: Gateway,
    pub extractive: Option<ExtractiveEndpoint>,
}

impl Runtime {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            extractive: None,
        }
    }

    pub fn with_extractive(mut self, ep: ExtractiveEndpoint) -> Self {
        self.extractive = Some(ep);
        self
    }

    /// Same backends, fresh transcript — one per question in batch runs.
    pub fn isolated(&self) -> Runtime {
        Runtime {
            gateway: self.gateway.isolated_session(),
            extractive: self.extractive.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pipeline {pipeline} is misconfigured: {reason}")]
    Misconfigured { pipeline: String, reason: String },
    #[error("document store is empty")]
    EmptyStore,
    #[error("no documents associated with question {0}")]
    NoAssociatedDocuments(QuestionId),
    #[error("question {question} references unknown document {document}")]
    DanglingAssociation {
        question: QuestionId,
        document: DocumentId,
    },
    #[error("highlight references unknown document {0}")]
    UnknownDocument(DocumentId),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Extractive(#[from] ExtractiveError),
}

impl From<SummarizeError> for PipelineError {
    fn from(e: SummarizeError) -> Self {
        match e {
            SummarizeError::UnknownDocument(id) => PipelineError::UnknownDocument(id),
            SummarizeError::Gateway(g) => PipelineError::Gateway(g),
        }
    }
}

/// Retrieve the documents a pipeline will see for a question. Both
/// pipeline families call this with the same spec, so comparisons hold
/// the retrieval step constant.
pub fn retrieve(
    store: &DocumentStore,
    q: &Question,
    spec: &PipelineSpec,
) -> Result<Vec<Document>, PipelineError> {
    if store.is_empty() {
        return Err(PipelineError::EmptyStore);
    }
    match spec.retriever {
        RetrieverKind::Passthrough => {
            let ids = store
                .associated(&q.id)
                .filter(|ids| !ids.is_empty())
                .ok_or_else(|| PipelineError::NoAssociatedDocuments(q.id.clone()))?;
            ids.iter()
                .map(|id| {
                    store.get(id).cloned().ok_or_else(|| {
                        PipelineError::DanglingAssociation {
                            question: q.id.clone(),
                            document: id.clone(),
                        }
                    })
                })
                .collect()
        }
        RetrieverKind::Lexical => {
            let query_tokens: BTreeSet<String> = normalize_tokens(&q.text).into_iter().collect();
            let mut scored: Vec<(usize, &Document)> = store
                .docs
                .iter()
                .enumerate()
                .map(|(idx, doc)| {
                    let overlap = query_tokens
                        .iter()
                        .filter(|t| store.token_sets[idx].contains(*t))
                        .count();
                    (overlap, doc)
                })
                .collect();
            scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
            Ok(scored
                .into_iter()
                .take(spec.k)
                .map(|(_, doc)| doc.clone())
                .collect())
        }
    }
}

/// Usage accumulated by calls recorded after `from` in the session
/// transcript — the per-run share when a session is reused.
fn usage_since(gateway: &Gateway, from: usize) -> TokenUsage {
    let mut total = TokenUsage::default();
    for entry in gateway.transcript().snapshot().iter().skip(from) {
        total.add(entry.usage);
    }
    total
}

/// Run the highlight & summarize pipeline for one question.
pub fn run_hs(
    q: &Question,
    spec: &PipelineSpec,
    store: &DocumentStore,
    rt: &Runtime,
) -> Result<PipelineAnswer, PipelineError> {
    spec.validate()?;
    let Some(highlighter) = spec.highlighter else {
        unreachable!("validate checked the highlighter");
    };
    let started = Instant::now();
    let transcript_mark = rt.gateway.transcript().len();

    let docs = retrieve(store, q, spec)?;
    let hs = match highlighter {
        HighlighterKind::Baseline => highlight_baseline(q, &docs, &spec.limits, &rt.gateway)?,
        HighlighterKind::Structured => highlight_structured(q, &docs, &spec.limits, &rt.gateway)?,
        HighlighterKind::Extractive => {
            let ep = rt
                .extractive
                .as_ref()
                .ok_or_else(|| PipelineError::Misconfigured {
                    pipeline: spec.name.clone(),
                    reason: "extractive highlighter selected but no endpoint configured".into(),
                })?;
            highlight_extractive(q, &docs, &spec.limits, ep)?
        }
    };

    let outcome = summarize(&hs, &docs, &spec.summarizer, &rt.gateway)?;
    let (answer, declined, guessed_question) = match outcome {
        SummarizeOutcome::Summary(out) => (out.answer, false, Some(out.guessed_question)),
        SummarizeOutcome::Declined => (DECLINE_MESSAGE.to_owned(), true, None),
    };
    Ok(PipelineAnswer {
        question_id: q.id.clone(),
        pipeline_name: spec.name.clone(),
        answer,
        declined,
        guessed_question,
        highlights: Some(hs.wire_spans()),
        elapsed_s: started.elapsed().as_secs_f64(),
        usage: usage_since(&rt.gateway, transcript_mark),
    })
}

/// Run the plain single-prompt comparator for one question: the question
/// and the retrieved documents go to the model together, and its raw text
/// is the answer. A reply equal to the canonical decline message (which
/// the prompt instructs for unanswerable questions) counts as a decline,
/// as does a blank reply.
pub fn run_vanilla(
    q: &Question,
    spec: &PipelineSpec,
    store: &DocumentStore,
    rt: &Runtime,
) -> Result<PipelineAnswer, PipelineError> {
    spec.validate()?;
    let started = Instant::now();
    let transcript_mark = rt.gateway.transcript().len();

    let docs = retrieve(store, q, spec)?;
    let req = ChatRequest::new(RoleTag::Vanilla, prompts::vanilla_messages(q, &docs));
    let completion = rt.gateway.complete(&req)?;
    let trimmed = completion.text.trim();
    let declined = trimmed == DECLINE_MESSAGE || trimmed.is_empty();
    let answer = if declined {
        DECLINE_MESSAGE.to_owned()
    } else {
        completion.text
    };
    Ok(PipelineAnswer {
        question_id: q.id.clone(),
        pipeline_name: spec.name.clone(),
        answer,
        declined,
        guessed_question: None,
        highlights: None,
        elapsed_s: started.elapsed().as_secs_f64(),
        usage: usage_since(&rt.gateway, transcript_mark),
    })
}

/// Run one question through whichever family `spec.kind` names.
pub fn run(
    q: &Question,
    spec: &PipelineSpec,
    store: &DocumentStore,
    rt: &Runtime,
) -> Result<PipelineAnswer, PipelineError> {
    match spec.kind {
        PipelineKind::Hs => run_hs(q, spec, store, rt),
        PipelineKind::Vanilla => run_vanilla(q, spec, store, rt),
    }
}

/// Run every record through one pipeline, each question in an isolated
/// session, optionally in parallel. Answer order matches record order.
pub fn run_batch(
    records: &[DatasetRecord],
    spec: &PipelineSpec,
    store: &DocumentStore,
    rt: &Runtime,
    jobs: usize,
) -> Result<Vec<PipelineAnswer>, PipelineError> {
    spec.validate()?;
    let run_one = |record: &DatasetRecord| -> Result<PipelineAnswer, PipelineError> {
        let q = record.question().map_err(|e| PipelineError::Misconfigured {
            pipeline: spec.name.clone(),
            reason: format!("record {}: {e}", record.id),
        })?;
        run(&q, spec, store, &rt.isolated())
    };
    if jobs <= 1 {
        records.iter().map(run_one).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| PipelineError::Misconfigured {
                pipeline: spec.name.clone(),
                reason: format!("cannot build a {jobs}-thread pool: {e}"),
            })?;
        pool.install(|| records.par_iter().map(run_one).collect())
    }
}
