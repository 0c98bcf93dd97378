//! Deterministic scripted backends for offline runs and tests.
//!
//! [`MockBackend`] is a pure function of (rule set, request): the
//! highest-priority rule whose pattern matches the concatenated message
//! contents supplies the response, with declaration order breaking ties.
//! [`SequenceBackend`] replays a fixed list of responses in order and is
//! meant for scripting multi-step interactions in tests.

use std::collections::VecDeque;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::TokenUsage;
use crate::gateway::{ChatBackend, ChatRequest, Completion, GatewayError};

/// How a rule matches against the request text.
#[derive(Debug, Clone)]
enum Matcher {
    Substring(String),
    Regex(regex::Regex),
}

impl Matcher {
    fn matches(&self, haystack: &str) -> bool {
        match self {
            Matcher::Substring(s) => haystack.contains(s),
            Matcher::Regex(re) => re.is_match(haystack),
        }
    }
}

/// One scripted rule, as loaded from a rules JSON file:
/// `[{"pattern", "is_regex", "priority", "response"}]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRule {
    pub pattern: String,
    #[serde(default)]
    pub is_regex: bool,
    #[serde(default)]
    pub priority: i64,
    pub response: String,
}

impl MockRule {
    pub fn substring(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            is_regex: false,
            priority: 0,
            response: response.into(),
        }
    }

    pub fn regex(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            is_regex: true,
            priority: 0,
            response: response.into(),
        }
    }

    pub fn with_priority(mut self, priority: i64) -> Self {
        self.priority = priority;
        self
    }
}

#[derive(Debug, Error)]
pub enum MockRuleError {
    #[error("rule {index}: invalid regular expression: {source}")]
    BadRegex {
        index: usize,
        source: regex::Error,
    },
    #[error("rules file is not a JSON array of rules: {0}")]
    BadFile(#[from] serde_json::Error),
}

#[derive(Debug)]
struct CompiledRule {
    matcher: Matcher,
    priority: i64,
    response: String,
}

/// Deterministic rule-driven backend.
#[derive(Debug)]
pub struct MockBackend {
    rules: Vec<CompiledRule>,
    default_response: String,
}

impl MockBackend {
    pub fn new(
        rules: Vec<MockRule>,
        default_response: impl Into<String>,
    ) -> Result<Self, MockRuleError> {
        let mut compiled = Vec::with_capacity(rules.len());
        for (index, rule) in rules.into_iter().enumerate() {
            let matcher = if rule.is_regex {
                Matcher::Regex(
                    regex::Regex::new(&rule.pattern)
                        .map_err(|source| MockRuleError::BadRegex { index, source })?,
                )
            } else {
                Matcher::Substring(rule.pattern)
            };
            compiled.push(CompiledRule {
                matcher,
                priority: rule.priority,
                response: rule.response,
            });
        }
        Ok(Self {
            rules: compiled,
            default_response: default_response.into(),
        })
    }

    /// Parse a rules JSON file (an array of rule objects).
    pub fn from_rules_json(
        json: &str,
        default_response: impl Into<String>,
    ) -> Result<Self, MockRuleError> {
        let rules: Vec<MockRule> = serde_json::from_str(json)?;
        Self::new(rules, default_response)
    }

    /// Pick the response for a request: highest priority among matching
    /// rules, earliest declared on ties, default when none match.
    fn respond(&self, haystack: &str) -> &str {
        let mut best: Option<&CompiledRule> = None;
        for rule in &self.rules {
            if !rule.matcher.matches(haystack) {
                continue;
            }
            match best {
                Some(b) if b.priority >= rule.priority => {}
                _ => best = Some(rule),
            }
        }
        best.map(|r| r.response.as_str())
            .unwrap_or(&self.default_response)
    }
}

/// Deterministic usage accounting for scripted backends: one token per
/// four characters, rounded up. Real counts come from live backends; this
/// just keeps usage fields exercised and reproducible.
fn synthetic_usage(prompt_chars: usize, completion_chars: usize) -> TokenUsage {
    TokenUsage {
        prompt_tokens: (prompt_chars as u64 + 3) / 4,
        completion_tokens: (completion_chars as u64 + 3) / 4,
    }
}

fn request_text(req: &ChatRequest) -> String {
    let parts: Vec<&str> = req.messages.iter().map(|m| m.content.as_str()).collect();
    parts.join("\n")
}

impl ChatBackend for MockBackend {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        let haystack = request_text(req);
        let response = self.respond(&haystack).to_owned();
        let usage = synthetic_usage(haystack.chars().count(), response.chars().count());
        Ok(Completion {
            text: response,
            usage,
        })
    }
}

/// Replays a fixed sequence of responses, one per call, regardless of
/// request content. Errs when the script is exhausted.
#[derive(Debug, Default)]
pub struct SequenceBackend {
    responses: Mutex<VecDeque<String>>,
}

impl SequenceBackend {
    pub fn new(responses: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("sequence lock").len()
    }
}

impl ChatBackend for SequenceBackend {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        let response = self
            .responses
            .lock()
            .expect("sequence lock")
            .pop_front()
            .ok_or_else(|| GatewayError::Transport {
                message: "scripted response sequence exhausted".into(),
            })?;
        let prompt_chars = request_text(req).chars().count();
        let usage = synthetic_usage(prompt_chars, response.chars().count());
        Ok(Completion {
            text: response,
            usage,
        })
    }
}
