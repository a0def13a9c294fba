//! The HTTP backend against a local mock of an OpenAI-compatible server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};
use worldllm::scoring::{
    GenerationParams, HttpBackend, HttpConfig, PromptBundle, ScorerBackend, ScoringError,
};

type Handler = dyn Fn(usize, &Value) -> (u16, String) + Send + Sync;

struct Mock {
    url: String,
    hits: Arc<AtomicUsize>,
    requests: Arc<Mutex<Vec<(Option<String>, Value)>>>,
}

/// Serves requests until the test process exits; `handler` gets the
/// zero-based request index and the JSON body.
fn mock(handler: Box<Handler>) -> Mock {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let requests = Arc::new(Mutex::new(Vec::new()));
    let (h, r) = (hits.clone(), requests.clone());
    let handler: Arc<Handler> = Arc::from(handler);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = None;
            let mut line = String::new();
            loop {
                line.clear();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                let lower = l.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(l["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0u8; len];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let i = h.fetch_add(1, Ordering::SeqCst);
            r.lock().unwrap().push((auth, body.clone()));
            let (status, text) = handler(i, &body);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    Mock { url, hits, requests }
}

fn config(url: &str) -> HttpConfig {
    HttpConfig {
        url: url.to_string(),
        api_key_env: None,
        chat_template: "<s>{system}|{user}|{assistant}".into(),
        attempts: 3,
        backoff_ms: 1,
        timeout_secs: 5,
        ..HttpConfig::default()
    }
}

fn bundle() -> PromptBundle {
    PromptBundle {
        system: "sys".into(),
        user: "You are standing on the water.".into(),
        target: "The seed grows.".into(),
    }
}

/// Echo response: one token per 3 characters, token `i` has log-probability
/// `-(i + 1) / 10` and the first token none.
fn echo_logprobs(prompt: &str) -> Value {
    let chars: Vec<char> = prompt.chars().collect();
    let offsets: Vec<usize> = (0..chars.len()).step_by(3).collect();
    let lps: Vec<Value> = offsets
        .iter()
        .enumerate()
        .map(|(i, _)| if i == 0 { Value::Null } else { json!(-((i + 1) as f64) / 10.0) })
        .collect();
    json!({"choices": [{"text": prompt, "logprobs": {"token_logprobs": lps, "text_offset": offsets}}]})
}

fn score_handler() -> Box<Handler> {
    Box::new(|_, body| (200, echo_logprobs(body["prompt"].as_str().unwrap()).to_string()))
}

#[test]
fn scores_only_the_target_span() {
    let m = mock(score_handler());
    let b = HttpBackend::new(config(&m.url)).unwrap();
    let s = b.score(&bundle()).unwrap();

    let prefix = "<s>sys|You are standing on the water.|";
    let full = format!("{prefix}The seed grows.");
    let (start, end) = (prefix.chars().count(), full.chars().count());
    let (mut total, mut count) = (0.0, 0);
    for (i, off) in (0..end).step_by(3).enumerate() {
        if off >= start {
            total += -((i + 1) as f64) / 10.0;
            count += 1;
        }
    }
    assert_eq!(s.token_count, count);
    assert!((s.total_logprob - total).abs() < 1e-12);

    let reqs = m.requests.lock().unwrap();
    let body = &reqs[0].1;
    assert_eq!(body["prompt"], json!(full));
    assert_eq!(body["echo"], json!(true));
    assert_eq!(body["logprobs"], json!(1));
    assert_eq!(reqs[0].0, None);
}

#[test]
fn retries_after_a_server_error() {
    let m = mock(Box::new(|i, body| {
        if i == 0 {
            (500, "{\"error\":\"busy\"}".into())
        } else {
            (200, echo_logprobs(body["prompt"].as_str().unwrap()).to_string())
        }
    }));
    let b = HttpBackend::new(config(&m.url)).unwrap();
    assert!(b.score(&bundle()).is_ok());
    assert_eq!(m.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn gives_up_after_the_configured_attempts() {
    let m = mock(Box::new(|_, _| (503, "down".into())));
    let b = HttpBackend::new(config(&m.url)).unwrap();
    match b.score(&bundle()) {
        Err(ScoringError::Exhausted { attempts, last }) => {
            assert_eq!(attempts, 3);
            assert!(last.contains("503"), "{last}");
        }
        other => panic!("expected exhaustion, got {other:?}"),
    }
    assert_eq!(m.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn missing_logprobs_is_an_error() {
    let m = mock(Box::new(|_, _| (200, json!({"choices": [{"text": "x"}]}).to_string())));
    let b = HttpBackend::new(HttpConfig { attempts: 1, ..config(&m.url) }).unwrap();
    let err = b.score(&bundle()).unwrap_err();
    assert!(matches!(err, ScoringError::Exhausted { .. }));
    assert!(err.to_string().contains("logprob"), "{err}");
}

#[test]
fn generation_sends_sampling_parameters() {
    let m = mock(Box::new(|_, _| (200, json!({"choices": [{"text": "New rule."}]}).to_string())));
    let b = HttpBackend::new(config(&m.url)).unwrap();
    let params = GenerationParams {
        max_tokens: 77,
        temperature: 0.5,
        seed: 9,
    };
    assert_eq!(b.generate(&bundle(), &params).unwrap(), "New rule.");
    let reqs = m.requests.lock().unwrap();
    assert_eq!(reqs[0].1["max_tokens"], json!(77));
    assert_eq!(reqs[0].1["temperature"], json!(0.5));
    assert_eq!(reqs[0].1["seed"], json!(9));
    assert_eq!(reqs[0].1["prompt"], json!("<s>sys|You are standing on the water.|"));
}

#[test]
fn api_key_comes_from_the_environment() {
    std::env::set_var("WORLDLLM_TEST_KEY", "sekret");
    let m = mock(score_handler());
    let b = HttpBackend::new(HttpConfig {
        api_key_env: Some("WORLDLLM_TEST_KEY".into()),
        ..config(&m.url)
    })
    .unwrap();
    b.score(&bundle()).unwrap();
    assert_eq!(m.requests.lock().unwrap()[0].0.as_deref(), Some("Bearer sekret"));
}
