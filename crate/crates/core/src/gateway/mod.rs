//! Uniform access to chat-completion models: a live wire client, a
//! deterministic scripted mock, and a transcript recorder.
//!
//! Every completed call is appended to the gateway's [`Transcript`], tagged
//! with the stage that issued it — that record is what the security
//! harness audits.

mod http;
mod mock;
mod schema;
mod transcript;

pub use http::{HttpBackend, HttpSettings};
pub use mock::{MockBackend, MockRule, MockRuleError, SequenceBackend};
pub use schema::{FieldKind, FieldMap, FieldSpec, FieldValue, SchemaError, SchemaSpec};
pub use transcript::{transcript_query, Transcript, TranscriptEntry};

use std::sync::Arc;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::TokenUsage;

/// Which pipeline stage issued a request; drives transcript auditing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleTag {
    Highlighter,
    Summarizer,
    Judge,
    Vanilla,
}

/// Chat message role on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgRole {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: MsgRole,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: MsgRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: MsgRole::User,
            content: content.into(),
        }
    }
}

/// Decoding defaults: deterministic, bounded output.
pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

/// One chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role_tag: RoleTag,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub output_schema: Option<SchemaSpec>,
}

impl ChatRequest {
    pub fn new(role_tag: RoleTag, messages: Vec<Message>) -> Self {
        Self {
            role_tag,
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            output_schema: None,
        }
    }

    pub fn with_decoding(mut self, temperature: f64, max_tokens: u32) -> Self {
        self.temperature = temperature;
        self.max_tokens = max_tokens;
        self
    }
}

/// Response text plus the usage the backend reported for the call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure: {message}")]
    Transport { message: String },
    #[error("server returned status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed completion response: {message}")]
    Response { message: String },
    #[error("API key environment variable {env_var} is not set")]
    MissingApiKey { env_var: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted {
        attempts: u32,
        #[source]
        last: Box<GatewayError>,
    },
    #[error("structured output failed after {attempts} attempts: {last_error}")]
    StructuredOutputFailure { attempts: u32, last_error: String },
}

impl GatewayError {
    /// Transport failures, non-success statuses, and timeouts (reported as
    /// transport failures) are worth retrying; everything else is terminal.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            GatewayError::Transport { .. } | GatewayError::Status { .. }
        )
    }
}

/// A single-attempt chat-completion backend. The [`Gateway`] layers the
/// retry policy and transcript recording on top.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, GatewayError>;
}

/// Result of a structured-output exchange: validated fields, how many
/// attempts it took, and the usage summed over all attempts.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredResult {
    pub fields: FieldMap,
    pub attempts: u32,
    pub usage: TokenUsage,
}

/// Uniform model access with transcript recording.
///
/// Cloning shares the backend and the transcript; [`Gateway::isolated_session`]
/// shares the backend but starts a fresh transcript, which is how batch
/// runners keep per-question transcripts separate.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    transcript: Transcript,
    retry_limit: u32,
}

/// Default number of extra attempts after a retryable failure.
pub const DEFAULT_RETRY_LIMIT: u32 = 2;

/// Default number of corrective retries for structured output.
pub const DEFAULT_STRUCTURED_RETRIES: u32 = 2;

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            backend,
            transcript: Transcript::new(),
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }

    pub fn with_retry_limit(mut self, retry_limit: u32) -> Self {
        self.retry_limit = retry_limit;
        self
    }

    /// Same backend, fresh transcript.
    pub fn isolated_session(&self) -> Gateway {
        Gateway {
            backend: Arc::clone(&self.backend),
            transcript: Transcript::new(),
            retry_limit: self.retry_limit,
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Complete a request, retrying retryable failures up to the retry
    /// limit. Successful calls are recorded in the transcript.
    pub fn complete(&self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        let attempts = self.retry_limit + 1;
        let mut last: Option<GatewayError> = None;
        for _ in 0..attempts {
            match self.backend.complete(req) {
                Ok(completion) => {
                    self.transcript.append(TranscriptEntry {
                        request: req.clone(),
                        response: completion.text.clone(),
                        usage: completion.usage,
                        at: SystemTime::now(),
                    });
                    return Ok(completion);
                }
                Err(e) if e.is_retryable() => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(GatewayError::RetriesExhausted {
            attempts,
            last: Box::new(last.expect("at least one attempt")),
        })
    }

    /// Complete with a required output schema: parse and validate the
    /// response, re-asking with a corrective instruction on failure, up to
    /// `max_retries` extra attempts.
    pub fn complete_structured(
        &self,
        req: &ChatRequest,
        schema: &SchemaSpec,
        max_retries: u32,
    ) -> Result<StructuredResult, GatewayError> {
        let mut req = req.clone();
        req.output_schema = Some(schema.clone());
        let mut usage = TokenUsage::default();
        let total = max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=total {
            let completion = self.complete(&req)?;
            usage.add(completion.usage);
            match parse_structured(&completion.text, schema) {
                Ok(fields) => {
                    return Ok(StructuredResult {
                        fields,
                        attempts: attempt,
                        usage,
                    })
                }
                Err(why) => {
                    req.messages
                        .push(Message::user(corrective_instruction(schema, &why)));
                    last_error = why;
                }
            }
        }
        Err(GatewayError::StructuredOutputFailure {
            attempts: total,
            last_error,
        })
    }
}

/// The instruction appended after an unparseable structured reply. Mock
/// rule sets can key on the fixed "could not be parsed" marker to script
/// succeed-on-retry behavior.
fn corrective_instruction(schema: &SchemaSpec, why: &str) -> String {
    format!(
        "Your previous reply could not be parsed: {why}. \
         Reply again with {} and no other text.",
        schema.shape_hint()
    )
}

/// Parse model text into schema fields: strip surrounding prose or code
/// fences by extracting the first balanced JSON object, then validate.
pub fn parse_structured(text: &str, schema: &SchemaSpec) -> Result<FieldMap, String> {
    let object = extract_json_object(text).ok_or("no JSON object found in the reply")?;
    let value: serde_json::Value =
        serde_json::from_str(object).map_err(|e| format!("invalid JSON: {e}"))?;
    schema.validate(&value)
}

/// The first balanced `{ ... }` region of `text`, honoring string literals
/// and escapes so embedded braces don't derail the scan.
fn extract_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}
