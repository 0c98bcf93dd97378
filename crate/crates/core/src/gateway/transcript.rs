//! Append-only record of completed model calls, used by the security
//! harness to audit what each pipeline stage was shown.

use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use crate::domain::TokenUsage;
use crate::gateway::{ChatRequest, RoleTag};

/// One completed call: the request as issued, the raw response text, and
/// the usage the backend reported.
#[derive(Debug, Clone)]
pub struct TranscriptEntry {
    pub request: ChatRequest,
    pub response: String,
    pub usage: TokenUsage,
    pub at: SystemTime,
}

/// Shared, append-only call log. Cloning shares the underlying log;
/// appends are serialized, so entry order equals completion order.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    entries: Arc<Mutex<Vec<TranscriptEntry>>>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn append(&self, entry: TranscriptEntry) {
        self.entries.lock().expect("transcript lock").push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("transcript lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A point-in-time copy of all entries.
    pub fn snapshot(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript lock").clone()
    }

    /// Total usage across all recorded calls.
    pub fn total_usage(&self) -> TokenUsage {
        let mut total = TokenUsage::default();
        for e in self.entries.lock().expect("transcript lock").iter() {
            total.add(e.usage);
        }
        total
    }

    /// Number of requests with the given role tag whose message contents
    /// contain `needle` as a substring. Counts requests, not occurrences.
    pub fn query(&self, role_tag: RoleTag, needle: &str) -> usize {
        self.entries
            .lock()
            .expect("transcript lock")
            .iter()
            .filter(|e| e.request.role_tag == role_tag)
            .filter(|e| e.request.messages.iter().any(|m| m.content.contains(needle)))
            .count()
    }

    /// Raw response texts of all requests with the given role tag, in call
    /// order. The security harness scans these for tool-call syntax.
    pub fn responses(&self, role_tag: RoleTag) -> Vec<String> {
        self.entries
            .lock()
            .expect("transcript lock")
            .iter()
            .filter(|e| e.request.role_tag == role_tag)
            .map(|e| e.response.clone())
            .collect()
    }
}

/// Standalone form of [`Transcript::query`], convenient at call sites that
/// hold a transcript value.
pub fn transcript_query(t: &Transcript, role_tag: RoleTag, needle: &str) -> usize {
    t.query(role_tag, needle)
}
