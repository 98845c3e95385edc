use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::json;

use super::*;

/// Replies with a fixed script and counts calls.
struct Scripted {
    replies: Mutex<Vec<String>>,
    calls: AtomicUsize,
    limit: usize,
}

impl Scripted {
    fn new(replies: &[&str]) -> Self {
        Self {
            replies: Mutex::new(replies.iter().rev().map(|s| s.to_string()).collect()),
            calls: AtomicUsize::new(0),
            limit: DEFAULT_CONTEXT_LIMIT,
        }
    }
}

impl Backend for Scripted {
    fn id(&self) -> String {
        "scripted".into()
    }
    fn context_limit(&self) -> usize {
        self.limit
    }
    fn send(&self, _messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.replies
            .lock()
            .unwrap()
            .pop()
            .ok_or_else(|| LlmError::BackendUnavailable("script exhausted".into()))
    }
}

fn page_type_prompt() -> PromptEnvelope {
    PromptEnvelope::new("page_type.v1", "[template page_type.v1]\nclassify", vec![], SchemaId::PageType)
}

#[test]
fn well_formed_reply_parses_first_time() {
    let backend = Scripted::new(&["```json\n{\"page_type\": \"login\"}\n```"]);
    let response = complete(&page_type_prompt(), &backend).unwrap();
    assert_eq!(response.parsed, Some(json!({"page_type": "login"})));
    assert!(!response.repaired);
    assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn one_repair_then_success() {
    let backend = Scripted::new(&["it is a login page", "{\"page_type\": \"login\"}"]);
    let response = complete(&page_type_prompt(), &backend).unwrap();
    assert!(response.repaired);
    assert_eq!(backend.calls.load(Ordering::SeqCst), 2);
}

#[test]
fn second_bad_reply_is_schema_failure() {
    let backend = Scripted::new(&["nope", "{\"kind\": 1}", "never sent"]);
    match complete(&page_type_prompt(), &backend) {
        Err(LlmError::SchemaFailure { response, .. }) => {
            assert!(response.parsed.is_none());
            assert_eq!(response.raw_text, "{\"kind\": 1}");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(backend.calls.load(Ordering::SeqCst), 2);
}

#[test]
fn overflow_is_caught_before_sending() {
    let mut backend = Scripted::new(&["{}"]);
    backend.limit = 10;
    let envelope = PromptEnvelope::new("t", "x".repeat(400), vec![], SchemaId::FreeText);
    assert!(matches!(complete(&envelope, &backend), Err(LlmError::ContextOverflow { .. })));
    assert_eq!(backend.calls.load(Ordering::SeqCst), 0);
}

#[test]
fn schema_shapes() {
    let ok = json!({"cases": [{
        "name": "n", "priority": "High", "description": "d", "test_type": "navigation",
        "target_page": "https://a/", "steps": [{"verb": "navigate", "target": "https://a/"}],
        "expected": ["x"], "data_slots": [{"element_id": "e0001", "slot": "s", "scenario": null}]
    }]});
    assert!(validate(SchemaId::TestCaseBatch, &ok).is_ok());
    let mut bad = ok.clone();
    bad["cases"][0]["steps"][0]["verb"] = json!(3);
    assert!(validate(SchemaId::TestCaseBatch, &bad).unwrap_err().contains("verb"));
    assert!(validate(SchemaId::TestCaseBatch, &json!({"cases": {}})).is_err());
    assert!(validate(SchemaId::DataMapping, &json!({"mappings": [{"slot": "a", "column": null}]})).is_ok());
    assert!(validate(SchemaId::FreeText, &json!("  ")).is_err());
}

#[test]
fn json_extraction_tolerates_prose() {
    let v = extract_json(SchemaId::PageType, "Sure! {\"page_type\": \"form\"} hope that helps").unwrap();
    assert_eq!(v, json!({"page_type": "form"}));
    assert!(extract_json(SchemaId::PageType, "no json here").is_err());
    assert_eq!(extract_json(SchemaId::FreeText, " hi ").unwrap(), json!("hi"));
}

#[test]
fn digest_ignores_line_ending_style() {
    let a = [ChatMessage::new(Role::User, "a\r\nb")];
    let b = [ChatMessage::new(Role::User, "a\nb")];
    assert_eq!(prompt_digest(&a), prompt_digest(&b));
    assert_ne!(prompt_digest(&a), prompt_digest(&[ChatMessage::new(Role::System, "a\nb")]));
}

#[test]
fn empty_session_records_empty_archive() {
    let recorder = RecordingBackend::new(Scripted::new(&[]));
    assert!(record_transcript(&recorder).is_empty());
}

#[test]
fn record_then_replay_round_trip() {
    let recorder = RecordingBackend::new(Scripted::new(&["one", "two", "three"]));
    let prompts: Vec<_> = (0..3)
        .map(|i| PromptEnvelope::new("t", format!("prompt {i}"), vec![], SchemaId::FreeText))
        .collect();
    let live: Vec<_> = prompts.iter().map(|p| complete(p, &recorder).unwrap()).collect();
    let archive = record_transcript(&recorder);
    assert_eq!(archive.len(), 3);

    let dir = tempfile::tempdir().unwrap();
    archive.write_dir(dir.path()).unwrap();
    let replay = ReplayBackend::open(dir.path()).unwrap();
    assert_eq!(replay.archive(), &archive);
    for (prompt, original) in prompts.iter().zip(&live) {
        let again = complete(prompt, &replay).unwrap();
        assert_eq!(again.raw_text, original.raw_text);
        assert_eq!(again.parsed, original.parsed);
        assert_eq!(again.latency_ms, 0);
    }
    let unknown = PromptEnvelope::new("t", "never recorded", vec![], SchemaId::FreeText);
    assert!(matches!(complete(&unknown, &replay), Err(LlmError::MissingTranscript { .. })));
}

#[test]
fn truncated_digest_collision_is_refused() {
    let archive = TranscriptArchive::with_digest_len(1);
    let recorder = RecordingBackend::with_archive(
        Scripted::new(&(0..40).map(|_| "r").collect::<Vec<_>>()),
        archive,
    );
    // 17 distinct prompts over 16 possible one-hex-digit keys must collide.
    let outcomes: Vec<_> = (0..17)
        .map(|i| recorder.send(&[ChatMessage::new(Role::User, format!("p{i}"))]))
        .collect();
    assert!(outcomes.iter().any(|o| matches!(o, Err(LlmError::DigestCollision { .. }))));
    assert!(record_transcript(&recorder).len() <= 16);
}

#[test]
fn template_header_round_trip() {
    let text = format!("{}\nbody", template_header("testgen.v1"));
    assert_eq!(template_of(&text), Some("testgen.v1"));
    assert_eq!(template_of("plain"), None);
}
