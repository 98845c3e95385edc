//! Uniform access to language-model backends.
//!
//! Every call goes through [`complete`], which enforces the context limit
//! before anything is sent, parses the reply against the expected schema and
//! spends at most one repair re-prompt on a malformed reply.

mod live;
mod mock;
mod replay;
mod schema;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::{sha256_hex, to_canonical_json};
use crate::estimate_tokens;
pub use live::{LiveBackend, LiveConfig};
pub use mock::RuleMockBackend;
pub use replay::{record_transcript, RecordingBackend, ReplayBackend, TranscriptArchive, TranscriptEntry};
pub use schema::{extract_json, validate, SchemaId};

pub const SYSTEM_PROMPT: &str = "You are a quality engineering assistant that analyses web \
applications and designs functional tests. When a JSON reply format is requested, answer \
with that JSON only.";

pub const DEFAULT_CONTEXT_LIMIT: usize = 32_768;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("prompt needs {estimated} tokens but the backend accepts {limit}")]
    ContextOverflow { estimated: usize, limit: usize },
    #[error("reply does not match schema {schema} after one repair attempt: {reason}")]
    SchemaFailure {
        schema: SchemaId,
        reason: String,
        /// The last reply, with `parsed` absent.
        response: Box<LlmResponse>,
    },
    #[error("no recorded reply for prompt digest {digest}")]
    MissingTranscript { digest: String },
    #[error("digest {digest} already records a different prompt")]
    DigestCollision { digest: String },
    #[error("transcript archive: {0}")]
    Archive(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub template_id: String,
    pub system_text: String,
    pub rendered_text: String,
    pub estimated_tokens: usize,
    /// Chunk ids and previously accepted case ids embedded in the prompt.
    pub context_refs: Vec<String>,
    pub expected_schema: SchemaId,
}

impl PromptEnvelope {
    pub fn new(
        template_id: impl Into<String>,
        rendered_text: impl Into<String>,
        context_refs: Vec<String>,
        expected_schema: SchemaId,
    ) -> Self {
        let system_text = SYSTEM_PROMPT.to_string();
        let rendered_text = rendered_text.into();
        let estimated_tokens = estimate_tokens(&system_text) + estimate_tokens(&rendered_text);
        Self {
            template_id: template_id.into(),
            system_text,
            rendered_text,
            estimated_tokens,
            context_refs,
            expected_schema,
        }
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage::new(Role::System, &self.system_text),
            ChatMessage::new(Role::User, &self.rendered_text),
        ]
    }

    pub fn digest(&self) -> String {
        prompt_digest(&self.messages())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub raw_text: String,
    pub parsed: Option<Value>,
    pub backend_id: String,
    pub latency_ms: u64,
    pub repaired: bool,
}

pub trait Backend: Send + Sync {
    fn id(&self) -> String;
    fn context_limit(&self) -> usize;
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
    /// Hermetic backends report zero latency so artifacts stay byte-stable.
    fn measures_latency(&self) -> bool {
        false
    }
}

impl fmt::Debug for dyn Backend + '_ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Backend({})", self.id())
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn id(&self) -> String {
        (**self).id()
    }
    fn context_limit(&self) -> usize {
        (**self).context_limit()
    }
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        (**self).send(messages)
    }
    fn measures_latency(&self) -> bool {
        (**self).measures_latency()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn context_limit(&self) -> usize {
        (**self).context_limit()
    }
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        (**self).send(messages)
    }
    fn measures_latency(&self) -> bool {
        (**self).measures_latency()
    }
}

/// Canonical digest of a conversation: SHA-256 over its canonical JSON with
/// line endings normalized.
pub fn prompt_digest(messages: &[ChatMessage]) -> String {
    let normalized: Vec<ChatMessage> = messages
        .iter()
        .map(|m| ChatMessage::new(m.role, m.content.replace("\r\n", "\n")))
        .collect();
    sha256_hex(to_canonical_json(&normalized).expect("messages always serialize"))
}

fn estimate_messages(messages: &[ChatMessage]) -> usize {
    messages.iter().map(|m| estimate_tokens(&m.content)).sum()
}

fn timed_send(backend: &dyn Backend, messages: &[ChatMessage]) -> Result<(String, u64), LlmError> {
    let limit = backend.context_limit();
    let estimated = estimate_messages(messages);
    if estimated > limit {
        return Err(LlmError::ContextOverflow { estimated, limit });
    }
    let start = Instant::now();
    let reply = backend.send(messages)?;
    let latency = if backend.measures_latency() {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok((reply, latency))
}

fn parse_reply(schema: SchemaId, raw: &str) -> Result<Value, String> {
    let value = extract_json(schema, raw)?;
    validate(schema, &value)?;
    Ok(value)
}

/// Sends one prompt and returns a reply whose `parsed` value conforms to the
/// envelope's schema.
pub fn complete(envelope: &PromptEnvelope, backend: &dyn Backend) -> Result<LlmResponse, LlmError> {
    let limit = backend.context_limit();
    if envelope.estimated_tokens > limit {
        return Err(LlmError::ContextOverflow {
            estimated: envelope.estimated_tokens,
            limit,
        });
    }
    let mut messages = envelope.messages();
    let (raw, latency) = timed_send(backend, &messages)?;
    let schema = envelope.expected_schema;
    let first_error = match parse_reply(schema, &raw) {
        Ok(parsed) => {
            return Ok(LlmResponse {
                raw_text: raw,
                parsed: Some(parsed),
                backend_id: backend.id(),
                latency_ms: latency,
                repaired: false,
            })
        }
        Err(e) => e,
    };
    log::debug!("reply to {} failed {schema}: {first_error}", envelope.template_id);
    messages.push(ChatMessage::new(Role::Assistant, raw.clone()));
    messages.push(ChatMessage::new(Role::User, repair_prompt(schema, &first_error)));
    let failure = |raw_text: String, latency_ms: u64, reason: String| LlmError::SchemaFailure {
        schema,
        reason,
        response: Box::new(LlmResponse {
            raw_text,
            parsed: None,
            backend_id: backend.id(),
            latency_ms,
            repaired: true,
        }),
    };
    let (raw2, latency2) = match timed_send(backend, &messages) {
        Ok(reply) => reply,
        Err(LlmError::ContextOverflow { .. }) => return Err(failure(raw, latency, first_error)),
        Err(e) => return Err(e),
    };
    match parse_reply(schema, &raw2) {
        Ok(parsed) => Ok(LlmResponse {
            raw_text: raw2,
            parsed: Some(parsed),
            backend_id: backend.id(),
            latency_ms: latency + latency2,
            repaired: true,
        }),
        Err(reason) => Err(failure(raw2, latency + latency2, reason)),
    }
}

pub fn repair_prompt(schema: SchemaId, error: &str) -> String {
    format!(
        "Your previous reply could not be used: {error}\n\
         Reply again with only a JSON value in the {schema} format described above."
    )
}

/// First line of every templated prompt; lets hermetic backends dispatch.
pub fn template_header(template_id: &str) -> String {
    format!("[template {template_id}]")
}

pub fn template_of(text: &str) -> Option<&str> {
    text.lines()
        .next()?
        .strip_prefix("[template ")?
        .strip_suffix(']')
}

#[cfg(test)]
mod tests;
