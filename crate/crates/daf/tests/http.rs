//! The HTTP clients against a throwaway local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use daf::backends::{HttpBackend, HttpEquivalence};
use daf::llm::HttpLlm;
use daf_core::corpus::Question;
use daf_core::metrics::{EquivalenceScorer, TokenOverlapScorer};
use daf_core::pipeline::{evaluate_question, PipelineConfig};
use daf_core::probing::{LlmClient, ProbeDirective, ProbeRequest};
use daf_core::scoring::{ScorerBackend, StubBackend};
use serde_json::{json, Value};

struct Seen {
    path: String,
    headers: Vec<String>,
    body: Value,
}

type Handler = dyn Fn(&Value) -> (u16, Value) + Send + Sync;

fn serve(handler: Box<Handler>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let handler: Arc<Handler> = Arc::from(handler);
    let log = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let (h, log) = (handler.clone(), log.clone());
            thread::spawn(move || connection(stream.unwrap(), &*h, &log));
        }
    });
    (format!("http://{addr}"), seen)
}

fn connection(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<Seen>>) {
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    loop {
        let mut start = String::new();
        if reader.read_line(&mut start).unwrap_or(0) == 0 {
            return;
        }
        let path = start.split_whitespace().nth(1).unwrap_or("/").to_string();
        let mut headers = Vec::new();
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end().to_string();
            if line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            headers.push(line);
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
        let (status, reply) = handler(&body);
        log.lock().unwrap().push(Seen { path, headers, body });
        let reply = reply.to_string();
        write!(
            writer,
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{reply}",
            reply.len()
        )
        .unwrap();
    }
}

fn logits_for(body: &Value) -> Vec<f64> {
    // longer options look less likely
    body["options"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| 2.0 - o.as_str().unwrap().len() as f64 / 2.0)
        .collect()
}

fn question() -> Question {
    let opts = ["Paris", "Lyon", "Marseille", "Bordeaux"].iter().map(|s| s.to_string()).collect();
    Question::new("q1", "France has a capital.", "Which city is the capital?", opts, 0)
}

#[test]
fn http_backend_matches_stub_with_same_logits() {
    let (url, seen) = serve(Box::new(|b| (200, json!({ "logits": logits_for(b) }))));
    let http = HttpBackend::new("remote", url, Duration::from_secs(5), true);
    let q = question();
    let expected = logits_for(&json!({ "options": q.options }));
    let stub = StubBackend::new("remote", 0.0).with_row("q1", &expected);
    let cfg = PipelineConfig {
        backends: vec!["remote".into()],
        ..PipelineConfig::default()
    };
    let a = evaluate_question(&q, &cfg, &[&http], &TokenOverlapScorer);
    let b = evaluate_question(&q, &cfg, &[&stub], &TokenOverlapScorer);
    assert!(!a.is_failed(), "{:?}", a.failure);
    assert_eq!(a, b);

    let seen = seen.lock().unwrap();
    let first = &seen[0].body;
    assert_eq!(first["id"], "q1");
    assert_eq!(first["context"], "France has a capital.");
    assert_eq!(first["options"].as_array().unwrap().len(), 4);
    assert!(http.supports_concurrency());
}

#[test]
fn http_backend_failure_is_a_question_failure() {
    let (url, _) = serve(Box::new(|_| (500, json!({ "error": "model not loaded" }))));
    let http = HttpBackend::new("remote", url, Duration::from_secs(5), false);
    let cfg = PipelineConfig {
        backends: vec!["remote".into()],
        ..PipelineConfig::default()
    };
    let r = evaluate_question(&question(), &cfg, &[&http], &TokenOverlapScorer);
    assert!(r.is_failed());
    assert!(r.scores.is_none());
}

#[test]
fn http_backend_rejects_malformed_reply() {
    let (url, _) = serve(Box::new(|_| (200, json!({ "scores": [1, 2] }))));
    let http = HttpBackend::new("remote", url, Duration::from_secs(5), true);
    let cfg = PipelineConfig {
        backends: vec!["remote".into()],
        ..PipelineConfig::default()
    };
    let r = evaluate_question(&question(), &cfg, &[&http], &TokenOverlapScorer);
    assert!(r.failure.unwrap().contains("bad response"));
}

#[test]
fn http_equivalence_round_trip() {
    let (url, seen) = serve(Box::new(|b| {
        let same = b["candidate"] == b["reference"];
        (200, json!({ "score": if same { 1.0 } else { 0.25 } }))
    }));
    let eq = HttpEquivalence::new(url, Duration::from_secs(5));
    assert_eq!(eq.equivalence("a", "a", "q").unwrap(), 1.0);
    assert_eq!(eq.equivalence("a", "b", "q").unwrap(), 0.25);
    assert_eq!(seen.lock().unwrap()[1].body["question"], "q");
}

#[test]
fn chat_completion_request_shape() {
    let (url, seen) = serve(Box::new(|_| {
        (200, json!({ "choices": [{ "message": { "role": "assistant", "content": "1. Nice\n2. Rome" } }] }))
    }));
    let llm = HttpLlm::new(format!("{url}/v1/chat/completions"), Some("k3y".into()), "m");
    let req = ProbeRequest {
        question_id: "q1",
        directive: "div+".parse::<ProbeDirective>().unwrap(),
        attempt: 0,
        prompt: "make distractors",
    };
    assert_eq!(llm.complete(&req).unwrap(), "1. Nice\n2. Rome");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert!(seen[0].headers.iter().any(|h| h == "authorization: Bearer k3y" || h == "Authorization: Bearer k3y"));
    assert_eq!(seen[0].body["model"], "m");
    assert_eq!(seen[0].body["temperature"], 0.0);
    assert_eq!(seen[0].body["messages"][0]["content"], "make distractors");
}

#[test]
fn chat_completion_without_choices_fails() {
    let (url, _) = serve(Box::new(|_| (200, json!({ "choices": [] }))));
    let llm = HttpLlm::new(url, None, "m");
    let req = ProbeRequest {
        question_id: "q1",
        directive: "plaus-".parse::<ProbeDirective>().unwrap(),
        attempt: 1,
        prompt: "p",
    };
    assert!(llm.complete(&req).is_err());
}
