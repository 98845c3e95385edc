//! Transcript archives: record a session once, replay it byte-for-byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{prompt_digest, Backend, ChatMessage, LlmError, DEFAULT_CONTEXT_LIMIT};
use crate::canonical::to_canonical_json;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub messages: Vec<ChatMessage>,
    pub response: String,
}

/// Prompt digest → recorded reply. On disk: one `<digest>.json` per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptArchive {
    entries: BTreeMap<String, TranscriptEntry>,
    digest_len: usize,
}

impl Default for TranscriptArchive {
    fn default() -> Self {
        Self::new()
    }
}

impl TranscriptArchive {
    pub fn new() -> Self {
        Self::with_digest_len(64)
    }

    /// Truncated digests exist to exercise collision handling.
    pub fn with_digest_len(digest_len: usize) -> Self {
        Self {
            entries: BTreeMap::new(),
            digest_len: digest_len.clamp(1, 64),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TranscriptEntry> {
        self.entries.values()
    }

    pub fn key(&self, messages: &[ChatMessage]) -> String {
        let mut digest = prompt_digest(messages);
        digest.truncate(self.digest_len);
        digest
    }

    pub fn insert(&mut self, messages: &[ChatMessage], response: &str) -> Result<(), LlmError> {
        let digest = self.key(messages);
        if let Some(existing) = self.entries.get(&digest) {
            if existing.messages != messages {
                return Err(LlmError::DigestCollision { digest });
            }
        }
        self.entries.insert(
            digest.clone(),
            TranscriptEntry {
                digest,
                messages: messages.to_vec(),
                response: response.to_string(),
            },
        );
        Ok(())
    }

    pub fn lookup(&self, messages: &[ChatMessage]) -> Result<&str, LlmError> {
        let digest = self.key(messages);
        match self.entries.get(&digest) {
            Some(entry) if entry.messages == messages => Ok(&entry.response),
            Some(_) => Err(LlmError::DigestCollision { digest }),
            None => Err(LlmError::MissingTranscript { digest }),
        }
    }

    pub fn load_dir(dir: &Path) -> Result<Self, LlmError> {
        let io = |e: std::io::Error| LlmError::Archive(format!("{}: {e}", dir.display()));
        let mut archive = Self::new();
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(io)?;
            let entry: TranscriptEntry = serde_json::from_str(&text)
                .map_err(|e| LlmError::Archive(format!("{}: {e}", path.display())))?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if stem != entry.digest {
                return Err(LlmError::Archive(format!(
                    "{} holds digest {}",
                    path.display(),
                    entry.digest
                )));
            }
            archive.digest_len = entry.digest.len().max(1);
            archive.entries.insert(entry.digest.clone(), entry);
        }
        Ok(archive)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), LlmError> {
        let io = |e: std::io::Error| LlmError::Archive(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        for entry in self.entries.values() {
            let text = to_canonical_json(entry).map_err(|e| LlmError::Archive(e.to_string()))?;
            fs::write(dir.join(format!("{}.json", entry.digest)), text).map_err(io)?;
        }
        Ok(())
    }
}

/// Answers from a transcript archive; unknown prompts are an error.
#[derive(Debug)]
pub struct ReplayBackend {
    archive: TranscriptArchive,
    context_limit: usize,
}

impl ReplayBackend {
    pub fn new(archive: TranscriptArchive) -> Self {
        Self { archive, context_limit: DEFAULT_CONTEXT_LIMIT }
    }

    pub fn open(dir: &Path) -> Result<Self, LlmError> {
        TranscriptArchive::load_dir(dir).map(Self::new)
    }

    pub fn with_context_limit(mut self, limit: usize) -> Self {
        self.context_limit = limit;
        self
    }

    pub fn archive(&self) -> &TranscriptArchive {
        &self.archive
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> String {
        "replay".into()
    }

    fn context_limit(&self) -> usize {
        self.context_limit
    }

    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.archive.lookup(messages).map(str::to_string)
    }
}

/// Wraps a backend and keeps every exchange for later replay.
pub struct RecordingBackend<B> {
    inner: B,
    archive: Mutex<TranscriptArchive>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self::with_archive(inner, TranscriptArchive::new())
    }

    pub fn with_archive(inner: B, archive: TranscriptArchive) -> Self {
        Self { inner, archive: Mutex::new(archive) }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn context_limit(&self) -> usize {
        self.inner.context_limit()
    }

    fn measures_latency(&self) -> bool {
        self.inner.measures_latency()
    }

    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        {
            let archive = self.archive.lock().expect("archive lock poisoned");
            match archive.lookup(messages) {
                Ok(recorded) => return Ok(recorded.to_string()),
                Err(LlmError::MissingTranscript { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let reply = self.inner.send(messages)?;
        self.archive
            .lock()
            .expect("archive lock poisoned")
            .insert(messages, &reply)?;
        Ok(reply)
    }
}

/// Snapshot of everything a recording session has seen so far.
pub fn record_transcript<B: Backend>(session: &RecordingBackend<B>) -> TranscriptArchive {
    session.archive.lock().expect("archive lock poisoned").clone()
}
