//! Blocking HTTP transport for remote text-generation, judge and embedding
//! endpoints, with bounded retries.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_WORLD_MODEL: &str = "CLINSIM_WORLD_MODEL";
pub const ENV_JUDGE: &str = "CLINSIM_JUDGE";
pub const ENV_EMBEDDER: &str = "CLINSIM_EMBEDDER";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("transport failed after {attempts} attempts: {message}")]
    Retryable { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("endpoint not configured: set {0}_URL")]
    NotConfigured(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub url: String,
    #[serde(default, skip_serializing)]
    pub token: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    60_000
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    200
}

impl Endpoint {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            token: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }

    /// Reads `<PREFIX>_URL` and optional `<PREFIX>_TOKEN`.
    pub fn from_env(prefix: &str) -> Result<Self, TransportError> {
        let url = std::env::var(format!("{prefix}_URL"))
            .map_err(|_| TransportError::NotConfigured(prefix.to_string()))?;
        let mut ep = Self::new(url);
        ep.token = std::env::var(format!("{prefix}_TOKEN")).ok();
        Ok(ep)
    }

    /// POSTs a JSON body and returns the response body as text.
    ///
    /// Connection failures, timeouts, HTTP 429 and 5xx are retried up to
    /// `max_retries` times with linear backoff.
    pub fn post_json(&self, body: &serde_json::Value) -> Result<String, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(self.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let attempts = self.max_retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            let mut req = agent.post(&self.url).header("Content-Type", "application/json");
            if let Some(tok) = &self.token {
                req = req.header("Authorization", &format!("Bearer {tok}"));
            }
            match req.send(body.to_string()) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    if (200..300).contains(&status) {
                        return Ok(text);
                    }
                    if status == 429 || status >= 500 {
                        last = format!("HTTP {status}: {text}");
                    } else {
                        return Err(TransportError::Status { status, body: text });
                    }
                }
                Err(e) => last = e.to_string(),
            }
            if attempt < attempts {
                std::thread::sleep(Duration::from_millis(self.backoff_ms * u64::from(attempt)));
            }
        }
        Err(TransportError::Retryable {
            attempts,
            message: last,
        })
    }
}

/// Extracts generated text from common completion response shapes:
/// `{"text": ..}`, `{"output": ..}`, `{"choices": [{"text": ..}]}`,
/// `{"choices": [{"message": {"content": ..}}]}`; anything else is taken
/// verbatim.
pub fn completion_text(body: &str) -> String {
    let Ok(v) = serde_json::from_str::<serde_json::Value>(body) else {
        return body.to_string();
    };
    let pick = |v: &serde_json::Value| v.as_str().map(str::to_string);
    pick(&v["text"])
        .or_else(|| pick(&v["output"]))
        .or_else(|| pick(&v["choices"][0]["text"]))
        .or_else(|| pick(&v["choices"][0]["message"]["content"]))
        .unwrap_or_else(|| body.to_string())
}

#[cfg(test)]
pub(crate) mod testing {
    //! Minimal single-threaded HTTP server for client tests.
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    pub struct MockServer {
        pub url: String,
        pub requests: Arc<Mutex<Vec<String>>>,
    }

    /// Serves the given `(status, body)` responses in order, one per request.
    pub fn serve(responses: Vec<(u16, String)>) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/generate", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0u8; len];
                let _ = reader.read_exact(&mut buf);
                log.lock().unwrap().push(String::from_utf8_lossy(&buf).into_owned());
                let mut stream = stream;
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        MockServer { url, requests }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast(url: &str) -> Endpoint {
        Endpoint {
            backoff_ms: 1,
            timeout_ms: 2_000,
            ..Endpoint::new(url)
        }
    }

    #[test]
    fn retries_server_errors() {
        let srv = testing::serve(vec![(503, "busy".into()), (200, r#"{"text":"ok"}"#.into())]);
        let body = fast(&srv.url).post_json(&serde_json::json!({"prompt": "p"})).unwrap();
        assert_eq!(completion_text(&body), "ok");
        assert_eq!(srv.requests.lock().unwrap().len(), 2);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let srv = testing::serve(vec![(400, "bad".into()), (200, "never".into())]);
        let err = fast(&srv.url).post_json(&serde_json::json!({})).unwrap_err();
        assert_eq!(
            err,
            TransportError::Status {
                status: 400,
                body: "bad".into()
            }
        );
    }

    #[test]
    fn connection_refused_is_retryable() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let mut ep = fast(&format!("http://{addr}/x"));
        ep.max_retries = 2;
        match ep.post_json(&serde_json::json!({})) {
            Err(TransportError::Retryable { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn completion_shapes() {
        assert_eq!(completion_text(r#"{"choices":[{"text":"a"}]}"#), "a");
        assert_eq!(
            completion_text(r#"{"choices":[{"message":{"content":"b"}}]}"#),
            "b"
        );
        assert_eq!(completion_text("plain"), "plain");
    }
}
