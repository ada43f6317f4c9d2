//! Chat-completions and embeddings over HTTP with retry and backoff.

use std::fmt;
use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::RetryPolicy;
use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "BIASFORGE_API_KEY";

pub struct HttpBackend {
    client: Client,
    base: String,
    api_key: Option<String>,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("base", &self.base)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Debug, Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

enum Attempt {
    Done(Value),
    Retry { status: Option<u16>, message: String, wait: Option<Duration> },
}

impl HttpBackend {
    pub fn new(base: &str, timeout: Duration) -> Result<Self> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(HttpBackend { client, base: base.trim_end_matches('/').to_string(), api_key })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn chat(&self, model: &str, prompt: &str, temperature: f64, seed: Option<u64>, retry: &RetryPolicy) -> Result<String> {
        let req = ChatRequest { model, messages: [Message { role: "user", content: prompt }], temperature, seed };
        let body = serde_json::to_value(&req).expect("request serializes");
        let v = self.post("chat/completions", &body, retry)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Protocol("missing choices[0].message.content".into()))
    }

    pub fn embed(&self, model: &str, texts: &[String], retry: &RetryPolicy) -> Result<Vec<Vec<f64>>> {
        let v = self.post("embeddings", &json!({ "model": model, "input": texts }), retry)?;
        let data = v.get("data").cloned().ok_or_else(|| Error::Protocol("missing data".into()))?;
        let mut items: Vec<EmbeddingItem> =
            serde_json::from_value(data).map_err(|e| Error::Protocol(format!("embeddings data: {e}")))?;
        if items.len() != texts.len() {
            return Err(Error::Protocol(format!("{} embeddings for {} inputs", items.len(), texts.len())));
        }
        if items.iter().all(|it| it.index.is_some()) {
            items.sort_by_key(|it| it.index);
        }
        Ok(items.into_iter().map(|it| it.embedding).collect())
    }

    fn post(&self, path: &str, body: &Value, retry: &RetryPolicy) -> Result<Value> {
        let url = format!("{}/{path}", self.base);
        let attempts = retry.max_attempts.max(1);
        let mut last = (None, String::new());
        for attempt in 1..=attempts {
            match self.attempt(&url, body)? {
                Attempt::Done(v) => return Ok(v),
                Attempt::Retry { status, message, wait } => {
                    log::warn!("POST {url} attempt {attempt}/{attempts} failed: {message}");
                    last = (status, message);
                    if attempt < attempts {
                        thread::sleep(wait.unwrap_or_else(|| retry.backoff(attempt)).min(retry.max_backoff()));
                    }
                }
            }
        }
        Err(Error::Transport { attempts, status: last.0, message: last.1 })
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<Attempt> {
        let mut req = self.client.post(url).json(body);
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => {
                return Ok(Attempt::Retry { status: None, message: e.to_string(), wait: None });
            }
            Err(e) => return Err(Error::Transport { attempts: 1, status: None, message: e.to_string() }),
        };
        let status = resp.status();
        let wait = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|h| h.to_str().ok())
            .and_then(|s| s.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry { status: Some(status.as_u16()), message: e.to_string(), wait: None }),
        };
        if status.is_success() {
            return serde_json::from_str(&text).map(Attempt::Done).map_err(|e| Error::Protocol(format!("{url}: {e}")));
        }
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Ok(Attempt::Retry { status: Some(status.as_u16()), message: format!("status {status}"), wait });
        }
        Err(Error::Rejected { status: status.as_u16(), body: text.chars().take(500).collect() })
    }
}
