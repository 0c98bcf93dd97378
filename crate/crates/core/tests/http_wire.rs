//! Wire-level tests against a scripted localhost HTTP server: what the
//! clients actually put on the socket, and how they react to failures.

mod common;

use std::sync::Arc;

use common::{serve, StubResponse};
use hisum_core::domain::{Document, Question};
use hisum_core::gateway::{
    ChatRequest, FieldKind, FieldSpec, Gateway, GatewayError, HttpBackend, HttpSettings, Message,
    RoleTag, SchemaSpec,
};
use hisum_core::highlight::{highlight_extractive, ExtractiveEndpoint, HighlightLimits};

fn completion_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 21, "completion_tokens": 7}
    })
    .to_string()
}

fn settings(base_url: &str) -> HttpSettings {
    HttpSettings {
        base_url: base_url.to_owned(),
        model: "wire-model".into(),
        api_key_env: None,
        timeout_s: 5,
    }
}

#[test]
fn chat_round_trip_carries_auth_messages_and_decoding() {
    let server = serve(vec![StubResponse::ok(completion_body(
        "The tramway closed in 1958.",
    ))]);

    std::env::set_var("HISUM_WIRE_TEST_KEY", "secret-123");
    let backend = HttpBackend::new(&HttpSettings {
        base_url: format!("{}/v1", server.base_url),
        api_key_env: Some("HISUM_WIRE_TEST_KEY".into()),
        ..settings(&server.base_url)
    })
    .unwrap();
    let gateway = Gateway::new(Arc::new(backend));

    let req = ChatRequest::new(
        RoleTag::Vanilla,
        vec![
            Message::system("You answer briefly."),
            Message::user("When did the tramway close?"),
        ],
    )
    .with_decoding(0.0, 128);
    let got = gateway.complete(&req).unwrap();
    assert_eq!(got.text, "The tramway closed in 1958.");
    assert_eq!(got.usage.prompt_tokens, 21);
    assert_eq!(got.usage.completion_tokens, 7);

    let seen = server.finish();
    assert_eq!(seen.len(), 1);
    let r = &seen[0];
    assert_eq!(r.method, "POST");
    assert_eq!(r.path, "/v1/chat/completions");
    assert_eq!(r.header("authorization"), Some("Bearer secret-123"));
    assert_eq!(r.header("content-type"), Some("application/json"));
    let body: serde_json::Value = serde_json::from_str(&r.body).unwrap();
    assert_eq!(body["model"], "wire-model");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], "You answer briefly.");
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], "When did the tramway close?");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 128);
    assert!(
        body.get("response_format").is_none(),
        "plain requests must not carry a response format"
    );
}

#[test]
fn retryable_server_errors_are_retried_to_success() {
    let server = serve(vec![
        StubResponse::new(500, r#"{"error": "overloaded"}"#),
        StubResponse::ok(completion_body("recovered")),
    ]);
    let backend = HttpBackend::new(&settings(&server.base_url)).unwrap();
    let gateway = Gateway::new(Arc::new(backend));

    let req = ChatRequest::new(RoleTag::Summarizer, vec![Message::user("hello")]);
    let got = gateway.complete(&req).unwrap();
    assert_eq!(got.text, "recovered");

    let seen = server.finish();
    assert_eq!(seen.len(), 2, "one failure plus one retry");
    assert_eq!(seen[0].body, seen[1].body, "the retry re-sends the same request");
}

#[test]
fn persistent_server_errors_exhaust_the_retry_budget() {
    let failure = || StubResponse::new(500, r#"{"error": "down"}"#);
    let server = serve(vec![failure(), failure(), failure()]);
    let backend = HttpBackend::new(&settings(&server.base_url)).unwrap();
    let gateway = Gateway::new(Arc::new(backend));

    let req = ChatRequest::new(RoleTag::Vanilla, vec![Message::user("hello")]);
    match gateway.complete(&req) {
        Err(GatewayError::RetriesExhausted { attempts: 3, last }) => {
            assert!(matches!(*last, GatewayError::Status { code: 500, .. }));
        }
        other => panic!("expected exhausted retries, got {other:?}"),
    }
    assert_eq!(server.finish().len(), 3, "initial attempt plus two retries");
}

#[test]
fn structured_requests_put_the_schema_on_the_wire() {
    let content = r#"{"guessed_question": "When did it close?", "answer": "In 1958."}"#;
    let server = serve(vec![StubResponse::ok(completion_body(content))]);
    let backend = HttpBackend::new(&settings(&server.base_url)).unwrap();
    let gateway = Gateway::new(Arc::new(backend));

    let schema = SchemaSpec::new(
        "summary",
        vec![
            FieldSpec::required("guessed_question", FieldKind::String),
            FieldSpec::required("answer", FieldKind::String),
        ],
    )
    .unwrap();
    let req = ChatRequest::new(
        RoleTag::Summarizer,
        vec![Message::system("sys"), Message::user("usr")],
    );
    let got = gateway.complete_structured(&req, &schema, 2).unwrap();
    assert_eq!(got.attempts, 1);
    assert_eq!(got.fields["answer"].as_str(), Some("In 1958."));
    assert_eq!(
        got.fields["guessed_question"].as_str(),
        Some("When did it close?")
    );

    let seen = server.finish();
    assert_eq!(seen.len(), 1);
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    let rf = &body["response_format"];
    assert_eq!(rf["type"], "json_schema");
    assert_eq!(rf["json_schema"]["strict"], true);
    let schema_value = &rf["json_schema"]["schema"];
    assert!(schema_value["properties"]["guessed_question"].is_object());
    assert!(schema_value["properties"]["answer"].is_object());
    assert_eq!(schema_value["required"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_success_body_is_a_terminal_error() {
    let server = serve(vec![StubResponse::ok("not json")]);
    let backend = HttpBackend::new(&settings(&server.base_url)).unwrap();
    let gateway = Gateway::new(Arc::new(backend));

    let req = ChatRequest::new(RoleTag::Vanilla, vec![Message::user("hello")]);
    match gateway.complete(&req) {
        Err(GatewayError::Response { message }) => assert!(message.contains("not JSON")),
        other => panic!("expected a response-shape error, got {other:?}"),
    }
    assert_eq!(
        server.finish().len(),
        1,
        "malformed bodies are terminal, not retried"
    );
}

#[test]
fn extractive_round_trip_sends_question_and_filters_spans() {
    let doc_text = "The tramway closed in 1958 because flood damage made the viaduct unsafe.";
    let reply = serde_json::json!({
        "spans": [
            {"start": 4, "end": 26, "confidence": 0.92},
            {"start": 0, "end": 10, "confidence": 0.05},
            {"start": 0, "end": 999, "confidence": 0.9},
            {"start": 2, "end": 5, "confidence": 0.9},
        ]
    });
    let server = serve(vec![StubResponse::ok(reply.to_string())]);

    let ep = ExtractiveEndpoint {
        base_url: server.base_url.clone(),
        timeout_s: 5,
        confidence_floor: 0.3,
    };
    let limits = HighlightLimits::new(95.0, 5, 3).unwrap();
    let q = Question::new("q-tram", "Why did the tramway close?").unwrap();
    let doc = Document::new("d-tram", doc_text).unwrap();

    let hs = highlight_extractive(&q, std::slice::from_ref(&doc), &limits, &ep).unwrap();
    assert_eq!(hs.len(), 1, "only the confident in-bounds span survives");
    assert_eq!(hs.spans[0].text, "tramway closed in 1958");
    assert!((hs.spans[0].score - 92.0).abs() < 1e-12);
    assert_eq!(hs.spans[0].span.slice(&doc).unwrap(), "tramway closed in 1958");

    let seen = server.finish();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].method, "POST");
    assert_eq!(seen[0].path, "/extract");
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(body["question"], "Why did the tramway close?");
    assert_eq!(body["document"], doc_text);
    assert_eq!(body["max_spans"], 3);
}

#[test]
fn unreachable_extractive_service_is_a_hard_error_not_a_decline() {
    // Port 9 (discard) refuses connections on loopback.
    let ep = ExtractiveEndpoint {
        base_url: "http://127.0.0.1:9".into(),
        timeout_s: 1,
        confidence_floor: 0.3,
    };
    let limits = HighlightLimits::new(95.0, 5, 3).unwrap();
    let q = Question::new("q", "anything").unwrap();
    let doc = Document::new("d", "some document text").unwrap();
    let err = highlight_extractive(&q, &[doc], &limits, &ep).unwrap_err();
    assert!(matches!(
        err,
        hisum_core::highlight::ExtractiveError::Unavailable { .. }
    ));
}
