use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use newsview_core::llm::{Backend, ChatMessage, ChatRequest, HttpBackend, HttpConfig, LlmError};
use newsview_core::retry::RetryPolicy;
use newsview_core::wikidata::{HttpApi, WikidataApi};

/// Serves `responses` in order (status, body), one per connection, and
/// counts the requests it saw.
fn stub(responses: Vec<(u16, &'static str)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let seen = hits.clone();
    thread::spawn(move || {
        for (status, body) in responses {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream);
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
            }
            let mut buf = vec![0; length];
            let _ = reader.read_exact(&mut buf);
            seen.fetch_add(1, Ordering::SeqCst);
            let mut stream = reader.into_inner();
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (format!("http://{addr}"), hits)
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy { max_attempts: 6, base_delay_ms: 1, max_delay_ms: 5, budget_ms: 10_000 }
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"1"},"finish_reason":"stop"}],"usage":{"prompt_tokens":10,"completion_tokens":1}}"#;

fn request() -> ChatRequest {
    ChatRequest::new("gpt-4o-mini", vec![ChatMessage::user("hello")], 4)
}

#[test]
fn rate_limits_are_retried_until_success() {
    let (base, hits) = stub(vec![(429, "{}"), (429, "{}"), (429, "{}"), (200, OK)]);
    let cfg = HttpConfig { endpoint: format!("{base}/v1/chat/completions"), timeout_ms: 5_000, retry: fast_retry() };
    let backend = HttpBackend::new(cfg, Some("test-key".into())).unwrap();
    let response = backend.complete(&request()).unwrap();
    assert_eq!(response.content, "1");
    assert_eq!(hits.load(Ordering::SeqCst), 4);
}

#[test]
fn auth_failures_are_not_retried() {
    let (base, hits) = stub(vec![(401, r#"{"error":"bad key"}"#), (200, OK)]);
    let cfg = HttpConfig { endpoint: format!("{base}/v1/chat/completions"), timeout_ms: 5_000, retry: fast_retry() };
    let backend = HttpBackend::new(cfg, Some("wrong".into())).unwrap();
    assert!(matches!(backend.complete(&request()), Err(LlmError::Auth(_))));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn exhausted_rate_limit_is_reported() {
    let (base, hits) = stub(vec![(429, "{}"); 3]);
    let retry = RetryPolicy { max_attempts: 3, ..fast_retry() };
    let cfg = HttpConfig { endpoint: format!("{base}/v1/chat/completions"), timeout_ms: 5_000, retry };
    let backend = HttpBackend::new(cfg, Some("k".into())).unwrap();
    assert!(matches!(backend.complete(&request()), Err(LlmError::RateLimited { .. })));
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn wikidata_search_retries_429() {
    let body = r#"{"search":[{"id":"Q16515053","label":"Keir Starmer","description":"Prime Minister of the United Kingdom since 2024"}]}"#;
    let (base, hits) = stub(vec![(429, "{}"), (200, body)]);
    let api = HttpApi::new(&format!("{base}/w/api.php"), fast_retry()).unwrap();
    let hits_found = api.search("Keir Starmer").unwrap();
    assert_eq!(hits_found[0].qid, "Q16515053");
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}
