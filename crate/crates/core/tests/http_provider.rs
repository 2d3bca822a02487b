//! The HTTP adapter against a local one-shot server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use flightlink_core::llm::{
    complete, ApiBudget, ChatTurn, HttpProvider, LlmError, ModelConfig, PriceTable, Provider,
};
use flightlink_core::streams::all_schemas;
use serde_json::{json, Value};

/// Serves one request with `status` and `body`; returns the request's
/// headers and JSON body through the join handle.
fn serve_once(status: u16, body: Value) -> (String, thread::JoinHandle<(String, Value)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut head = String::new();
        let mut length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            head.push_str(&line);
        }
        let mut buf = vec![0; length];
        reader.read_exact(&mut buf).unwrap();
        let payload = body.to_string();
        let reply = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
            payload.len()
        );
        reader.get_mut().write_all(reply.as_bytes()).unwrap();
        (head, serde_json::from_slice(&buf).unwrap())
    });
    (url, handle)
}

fn history() -> Vec<ChatTurn> {
    vec![ChatTurn::system("be a pilot"), ChatTurn::user("start mission-1")]
}

#[test]
fn request_and_response_follow_the_chat_completions_format() {
    let reply = json!({
        "choices": [{ "message": {
            "role": "assistant",
            "content": null,
            "tool_calls": [{
                "id": "call_abc",
                "type": "function",
                "function": { "name": "startMission", "arguments": "{\"mission_id\":\"mission-1\"}" }
            }]
        }}],
        "usage": { "prompt_tokens": 1200, "completion_tokens": 300 }
    });
    let (url, server) = serve_once(200, reply);
    let mut provider = HttpProvider::new(&url, "sk-test", Duration::from_secs(10));
    let config = ModelConfig { model_name: "gpt-4o".into(), max_tokens: 256, temperature: 0.0, system_prompt: None };
    let mut budget = ApiBudget::new(10, PriceTable::default().with("gpt-4o", 0.01, 0.03));
    let turn = complete(&mut provider, &history(), &all_schemas(), &config, &mut budget).unwrap();

    assert_eq!(turn.tool_calls.len(), 1);
    assert_eq!(turn.tool_calls[0].id, "call_abc");
    assert_eq!(turn.tool_calls[0].arguments, json!({"mission_id": "mission-1"}));
    assert_eq!((budget.prompt_tokens, budget.completion_tokens), (1200, 300));
    approx::assert_abs_diff_eq!(budget.accrued_cost, 0.012 + 0.009, epsilon = 1e-12);

    let (head, body) = server.join().unwrap();
    assert!(head.starts_with("POST /v1/chat/completions"));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer sk-test"));
    assert_eq!(body["model"], "gpt-4o");
    assert_eq!(body["max_tokens"], 256);
    assert_eq!(body["messages"][0], json!({"role": "system", "content": "be a pilot"}));
    assert_eq!(body["tools"].as_array().unwrap().len(), 8);
    assert_eq!(body["tools"][0]["function"]["name"], "startMission");
}

#[test]
fn unparseable_arguments_become_a_malformed_call() {
    let reply = json!({
        "choices": [{ "message": { "content": "", "tool_calls": [{
            "id": "c", "type": "function",
            "function": { "name": "moveAgent", "arguments": "{not json" }
        }]}}]
    });
    let (url, server) = serve_once(200, reply);
    let mut provider = HttpProvider::new(&url, "k", Duration::from_secs(10));
    let mut budget = ApiBudget::new(10, PriceTable::default());
    let err = complete(&mut provider, &history(), &all_schemas(), &ModelConfig::new("gpt-4o"), &mut budget);
    assert!(matches!(err, Err(LlmError::MalformedToolCall { .. })));
    server.join().unwrap();
}

#[test]
fn http_errors_and_dead_endpoints_are_provider_unavailable() {
    let (url, server) = serve_once(500, json!({"error": "boom"}));
    let mut provider = HttpProvider::new(&url, "k", Duration::from_secs(10));
    let r = provider.respond(&history(), &all_schemas(), &ModelConfig::new("gpt-4o"));
    assert!(matches!(r, Err(LlmError::ProviderUnavailable(m)) if m.contains("500")));
    server.join().unwrap();

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let mut provider = HttpProvider::new(&url, "k", Duration::from_secs(2));
    let r = provider.respond(&history(), &all_schemas(), &ModelConfig::new("gpt-4o"));
    assert!(matches!(r, Err(LlmError::ProviderUnavailable(_))));
}
