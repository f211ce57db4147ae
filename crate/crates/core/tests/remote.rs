//! Remote backend against a minimal in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use graphsearch::rollout::{
    BackendError, FinishReason, GenerationRequest, ModelBackend, RemoteBackend, RemoteConfig,
};

/// Serves `responses` in order, one per connection, and records each
/// request body.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in responses {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream);
            let mut len = 0;
            let mut line = String::new();
            loop {
                line.clear();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(String::from_utf8_lossy(&buf).into_owned());
            let mut stream = reader.into_inner();
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn backend(endpoint: &str) -> RemoteBackend {
    let mut cfg = RemoteConfig::new(endpoint, "test-model");
    cfg.initial_backoff = Duration::from_millis(5);
    cfg.timeout = Duration::from_secs(5);
    RemoteBackend::new(cfg)
}

fn request<'a>(transcript: &'a str) -> GenerationRequest<'a> {
    GenerationRequest {
        prompt: "classify this",
        transcript,
        step: 0,
        temperature: 0.7,
        max_tokens: 100,
        stop: &["</search>"],
    }
}

fn choice(content: &str, finish: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": finish}]
    })
    .to_string()
}

#[test]
fn retries_server_errors_then_restores_stop_tag() {
    let (url, seen) = serve(vec![
        (503, "busy".into()),
        (429, "slow down".into()),
        (200, choice("<think>x</think><search>mode=global, query=\"a\"", "stop")),
    ]);
    let g = backend(&url).generate(&request("<think>earlier</think>")).unwrap();
    assert_eq!(g.finish, FinishReason::StopSequence);
    assert!(g.text.ends_with("</search>"));
    let bodies = seen.lock().unwrap();
    assert_eq!(bodies.len(), 3);
    let body: serde_json::Value = serde_json::from_str(&bodies[2]).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["stop"][0], "</search>");
    assert_eq!(body["messages"][0]["content"], "classify this");
    assert_eq!(body["messages"][1]["role"], "assistant");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(400, "{\"error\":\"bad\"}".into()), (200, choice("x", "stop"))]);
    let err = backend(&url).generate(&request("")).unwrap_err();
    assert!(matches!(err, BackendError::Refusal(_)), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn answers_length_and_garbage() {
    let (url, _) = serve(vec![
        (200, choice("<answer>A</answer>", "stop")),
        (200, choice("<think>long", "length")),
        (200, "not json".into()),
    ]);
    let b = backend(&url);
    let g = b.generate(&request("")).unwrap();
    assert_eq!(g.finish, FinishReason::EndOfSequence);
    assert_eq!(g.text, "<answer>A</answer>");
    assert_eq!(b.generate(&request("")).unwrap_err(), BackendError::Length);
    assert!(matches!(b.generate(&request("")).unwrap_err(), BackendError::Protocol(_)));
}

#[test]
fn unreachable_endpoint_is_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut cfg = RemoteConfig::new(format!("http://127.0.0.1:{port}/v1"), "m");
    cfg.attempts = 2;
    cfg.initial_backoff = Duration::from_millis(1);
    let err = RemoteBackend::new(cfg).generate(&request("")).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err}");
}
