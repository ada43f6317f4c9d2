//! Model handles: a deterministic mock or a chat-completions-compatible endpoint.

pub mod http;
pub mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use biasforge_core::{EmbeddingSet, Provenance};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use http::HttpBackend;
use mock::MockMode;

/// Texts per embeddings request.
pub const EMBED_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_backoff_ms: 500, max_backoff_ms: 30_000 }
    }
}

impl RetryPolicy {
    /// `base · 2^(attempt-1)`, capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }

    pub fn max_backoff(&self) -> Duration {
        Duration::from_millis(self.max_backoff_ms)
    }
}

/// Serializable handle description. `base_url` is `mock`, `mock:<mode>`,
/// or an http(s) URL that the chat and embeddings paths are appended to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandleConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub max_concurrency: usize,
    pub retry: RetryPolicy,
    pub timeout_secs: u64,
}

impl Default for HandleConfig {
    fn default() -> Self {
        HandleConfig {
            base_url: "mock".into(),
            model: "mock".into(),
            temperature: 0.0,
            seed: None,
            max_concurrency: 4,
            retry: RetryPolicy::default(),
            timeout_secs: 120,
        }
    }
}

impl HandleConfig {
    pub fn is_mock(&self) -> bool {
        self.base_url == "mock" || self.base_url.starts_with("mock:")
    }
}

#[derive(Debug)]
enum Backend {
    Mock(MockMode),
    Http(HttpBackend),
}

#[derive(Debug)]
pub struct ModelHandle {
    cfg: HandleConfig,
    backend: Backend,
}

impl ModelHandle {
    pub fn new(cfg: HandleConfig) -> Result<Self> {
        if !cfg.temperature.is_finite() || cfg.temperature < 0.0 {
            return Err(Error::Config(format!("temperature must be finite and >= 0, got {}", cfg.temperature)));
        }
        if cfg.max_concurrency == 0 {
            return Err(Error::Config("max_concurrency must be at least 1".into()));
        }
        let backend = if cfg.is_mock() {
            Backend::Mock(cfg.base_url.strip_prefix("mock").unwrap_or("").trim_start_matches(':').parse()?)
        } else if cfg.base_url.starts_with("http://") || cfg.base_url.starts_with("https://") {
            Backend::Http(HttpBackend::new(&cfg.base_url, Duration::from_secs(cfg.timeout_secs.max(1)))?)
        } else {
            return Err(Error::Config(format!("base_url must be `mock`, `mock:<mode>` or an http(s) URL, got {:?}", cfg.base_url)));
        };
        Ok(ModelHandle { cfg, backend })
    }

    pub fn mock() -> Self {
        ModelHandle::new(HandleConfig::default()).expect("default handle is valid")
    }

    pub fn config(&self) -> &HandleConfig {
        &self.cfg
    }

    pub fn is_mock(&self) -> bool {
        matches!(self.backend, Backend::Mock(_))
    }

    pub fn chat_complete(&self, prompt: &str) -> Result<String> {
        if prompt.trim().is_empty() {
            return Err(Error::EmptyPrompt);
        }
        match &self.backend {
            Backend::Mock(mode) => Ok(mock::respond(*mode, prompt)),
            Backend::Http(h) => h.chat(&self.cfg.model, prompt, self.cfg.temperature, self.cfg.seed, &self.cfg.retry),
        }
    }

    /// Completes every prompt with at most `max_concurrency` requests in
    /// flight. Output order matches input order; the first error in input
    /// order is returned.
    pub fn chat_batch(&self, prompts: &[String]) -> Result<Vec<String>> {
        parallel_map(prompts, self.workers(prompts.len()), |p| self.chat_complete(p))
    }

    /// One vector per text, in order; rejects empty texts up front.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Err(Error::NoTexts);
        }
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(Error::EmptyText(i));
        }
        let vectors = match &self.backend {
            Backend::Mock(_) => texts.iter().map(|t| mock::embed(t).to_vec()).collect(),
            Backend::Http(h) => {
                let chunks: Vec<&[String]> = texts.chunks(EMBED_CHUNK).collect();
                let parts = parallel_map(&chunks, self.workers(chunks.len()), |c| h.embed(&self.cfg.model, c, &self.cfg.retry))?;
                parts.into_iter().flatten().collect::<Vec<Vec<f64>>>()
            }
        };
        let dim = vectors[0].len();
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(biasforge_core::Error::DimensionMismatch { expected: dim, found: bad.len() }.into());
        }
        Ok(vectors)
    }

    pub fn embed_set(&self, texts: &[String], ids: Vec<String>, source: Provenance) -> Result<EmbeddingSet> {
        Ok(EmbeddingSet::new(self.embed(texts)?, source, ids)?)
    }

    fn workers(&self, n: usize) -> usize {
        match self.backend {
            Backend::Mock(_) => 1,
            Backend::Http(_) => self.cfg.max_concurrency.min(n).max(1),
        }
    }
}

/// Maps `f` over `items` on `workers` scoped threads pulling from a shared index.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}
