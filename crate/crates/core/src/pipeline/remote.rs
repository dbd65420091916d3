//! HTTP backend speaking the chat-completions JSON format.

use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{BackendError, CompletionRequest, ModelBackend};

pub const API_KEY_ENV: &str = "XOSCGEN_API_KEY";
pub const BASE_URL_ENV: &str = "XOSCGEN_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base_url: String,
    model: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(base_url: &str, model: &str, api_key: &str) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(RemoteBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key: api_key.to_string(),
            client,
        })
    }

    /// Reads the key from `XOSCGEN_API_KEY` and the endpoint from
    /// `XOSCGEN_BASE_URL` (optional).
    pub fn from_env(model: &str) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::Auth(format!("{API_KEY_ENV} is not set")))?;
        let base = std::env::var(BASE_URL_ENV).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        Self::new(&base, model, &key)
    }

    pub fn request_body(&self, request: &CompletionRequest<'_>) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": request.prompt }],
            "temperature": request.temperature,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

/// Pulls `choices[0].message.content` out of a response body.
pub fn response_content(body: &Value) -> Result<String, BackendError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Protocol("response has no choices[0].message.content".into()))
}

impl ModelBackend for RemoteBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&self.request_body(request))
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(BackendError::Auth(format!("server answered {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Transport(format!("server answered {status}")));
        }
        let body: Value = response.json().map_err(|e| BackendError::Protocol(e.to_string()))?;
        response_content(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn serve_once(status: &'static str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut content_length = 0;
            let mut head = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
            }
            let mut body_in = vec![0; content_length];
            reader.read_exact(&mut body_in).unwrap();
            let reply = format!(
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let mut stream = stream;
            stream.write_all(reply.as_bytes()).unwrap();
            head + &String::from_utf8(body_in).unwrap()
        });
        (format!("http://{addr}/v1"), handle)
    }

    fn request(prompt: &str) -> CompletionRequest<'_> {
        CompletionRequest {
            stage: "BP",
            text: "t",
            prompt,
            temperature: 0.2,
            seed: Some(3),
            call_index: 0,
        }
    }

    #[test]
    fn posts_prompt_and_reads_content() {
        let (url, handle) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"{\"a\":1}"}}]}"#,
        );
        let backend = RemoteBackend::new(&url, "m1", "secret").unwrap();
        let out = backend.complete(&request("hello")).unwrap();
        assert_eq!(out, "{\"a\":1}");
        let seen = handle.join().unwrap();
        assert!(seen.starts_with("POST /v1/chat/completions"));
        assert!(seen.to_ascii_lowercase().contains("authorization: bearer secret"));
        assert!(seen.contains("\"model\":\"m1\""));
        assert!(seen.contains("\"seed\":3"));
    }

    #[test]
    fn unauthorized_maps_to_auth_error() {
        let (url, handle) = serve_once("401 Unauthorized", "{}");
        let backend = RemoteBackend::new(&url, "m", "bad").unwrap();
        assert!(matches!(backend.complete(&request("x")), Err(BackendError::Auth(_))));
        handle.join().unwrap();
    }

    #[test]
    fn missing_content_is_protocol_error() {
        assert!(matches!(
            response_content(&json!({"choices": []})),
            Err(BackendError::Protocol(_))
        ));
    }
}
