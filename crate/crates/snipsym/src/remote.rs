//! An agent backend that forwards requests to a chat-completions endpoint.

use std::time::Duration;

use serde_json::{json, Value};
use snipsym_core::agent::{AgentBackend, BackendError, Role};

use crate::config::RemoteConfig;

fn system_prompt(role: Role) -> &'static str {
    match role {
        Role::Oracle => "You plan the security analysis of an incomplete Rust CVE snippet. Reply with one JSON object: \
            {\"vulnerability_types\":[<CWE id>], \"complexity\":\"low|medium|high\", \"recommended_function_count\":<1-16>}.",
        Role::Safety => "You audit unsafe code in a Rust CVE snippet for the planned CWE classes. Reply with one JSON object: \
            {\"patterns\":[{\"name\":<string>,\"cwe_id\":<int>}], \"risk_score\":<0-10>, \"critical_lines\":[<1-based line>]}.",
        Role::Codegen => "You write self-contained Rust FFI wrappers that reproduce the snippet's vulnerability. Every function \
            is #[no_mangle] pub extern \"C\", returns i32, and takes only *mut u8, usize, i32 or u8 parameters. Use only std. \
            If compiler_diagnostic is present, fix previous_source. Reply with one JSON object: {\"wrapper_source\":<string>}.",
        Role::Filter => "You choose symbolic execution parameters for the assessed risk. Reply with one JSON object: \
            {\"search_strategy\":\"dfs|bfs|random-path\", \"time_limit_s\":<int>, \"memory_limit_mb\":<int>, \"max_fork_depth\":<int>}.",
    }
}

/// Pulls the first JSON object out of model text, tolerating code fences
/// and surrounding prose.
pub fn extract_json(text: &str) -> Option<Value> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Some(v);
    }
    let start = trimmed.find('{')?;
    let mut stream = serde_json::Deserializer::from_str(&trimmed[start..]).into_iter::<Value>();
    stream.next()?.ok()
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl RemoteBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: RemoteConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| BackendError(format!("environment variable {} is not set", config.api_key_env)))?;
        Ok(Self::new(config, api_key))
    }

    pub fn new(config: RemoteConfig, api_key: String) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(config.timeout_s)).build();
        RemoteBackend { config, api_key, agent }
    }
}

impl AgentBackend for RemoteBackend {
    fn respond(&self, role: Role, request: &Value) -> Result<Value, BackendError> {
        let body = json!({
            "model": self.config.model,
            "max_tokens": self.config.max_tokens,
            "temperature": 0,
            "messages": [
                { "role": "system", "content": system_prompt(role) },
                { "role": "user", "content": request.to_string() },
            ],
        });
        let response = self
            .agent
            .post(&self.config.endpoint)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| BackendError(format!("{role} request failed: {e}")))?;
        let doc: Value = response.into_json().map_err(|e| BackendError(format!("{role} response unreadable: {e}")))?;
        let text = doc
            .pointer("/choices/0/message/content")
            .or_else(|| doc.pointer("/content/0/text"))
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError(format!("{role} response has no message content")))?;
        // unparseable text is passed on as a string so the stage's schema
        // check can ask again
        Ok(extract_json(text).unwrap_or_else(|| Value::String(text.to_string())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    #[test]
    fn json_extraction() {
        assert_eq!(extract_json("{\"a\":1}"), Some(json!({"a":1})));
        assert_eq!(extract_json("Here:\n```json\n{\"a\": [1]}\n```\nDone"), Some(json!({"a":[1]})));
        assert_eq!(extract_json("no json"), None);
    }

    /// One-shot HTTP server answering with `reply`; returns the request body.
    fn serve_once(reply: Value) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut len = 0;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let payload = reply.to_string();
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
                payload.len()
            )
            .unwrap();
            format!("{auth}\n{}", String::from_utf8(body).unwrap())
        });
        (url, handle)
    }

    #[test]
    fn posts_and_parses() {
        let content =
            "```json\n{\"vulnerability_types\":[131],\"complexity\":\"high\",\"recommended_function_count\":9}\n```";
        let (url, server) = serve_once(json!({"choices":[{"message":{"content": content}}]}));
        let config = RemoteConfig { endpoint: url, model: "test-model".into(), timeout_s: 10, ..Default::default() };
        let backend = RemoteBackend::new(config, "k3y".into());
        let v = backend.respond(Role::Oracle, &json!({"snippet": {"cwe_id": 131}})).unwrap();
        assert_eq!(v["recommended_function_count"], 9);
        let seen = server.join().unwrap();
        assert!(seen.starts_with("Authorization: Bearer k3y") || seen.starts_with("authorization: Bearer k3y"));
        assert!(seen.contains("\"max_tokens\":2500"));
        assert!(seen.contains("test-model"));
    }

    #[test]
    fn transport_errors_surface() {
        let config = RemoteConfig { endpoint: "http://127.0.0.1:9/none".into(), timeout_s: 2, ..Default::default() };
        assert!(RemoteBackend::new(config, String::new()).respond(Role::Filter, &json!({})).is_err());
    }
}
