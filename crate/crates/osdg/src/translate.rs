//! Translation backends and the caching front-stage.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use osdg_core::hash::input_hash;
use osdg_core::pipeline::TranslationError;
use osdg_core::tokenize::token_texts;
use osdg_core::{LanguageCode, Translator};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest source phrase, in words, a dictionary entry may have.
const MAX_DICTIONARY_PHRASE: usize = 6;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("cannot read dictionary {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("dictionary is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dictionary entry {0:?} is longer than {MAX_DICTIONARY_PHRASE} words")]
    PhraseTooLong(String),
    #[error("dictionary has entries for English, which is never translated")]
    EnglishEntries,
}

/// Deterministic offline backend driven by a phrase table.
///
/// Input is tokenized, then the longest known phrase at each position is
/// replaced by its English rendering. Unknown words pass through unchanged.
/// The dictionary file maps language codes to `{source phrase: english}`.
#[derive(Debug, Clone)]
pub struct DictionaryBackend {
    tables: BTreeMap<LanguageCode, HashMap<Vec<String>, String>>,
}

impl DictionaryBackend {
    pub fn from_json(text: &str) -> Result<Self, DictionaryError> {
        let raw: BTreeMap<LanguageCode, BTreeMap<String, String>> = serde_json::from_str(text)?;
        let mut tables = BTreeMap::new();
        for (lang, entries) in raw {
            if lang.is_english() {
                return Err(DictionaryError::EnglishEntries);
            }
            let mut table = HashMap::new();
            for (src, dst) in entries {
                let key = token_texts(&src);
                if key.len() > MAX_DICTIONARY_PHRASE {
                    return Err(DictionaryError::PhraseTooLong(src));
                }
                if !key.is_empty() {
                    table.insert(key, dst);
                }
            }
            tables.insert(lang, table);
        }
        Ok(DictionaryBackend { tables })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DictionaryError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DictionaryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

impl Translator for DictionaryBackend {
    fn name(&self) -> &str {
        "dictionary"
    }

    fn translate(&self, text: &str, source: LanguageCode) -> Result<String, TranslationError> {
        let table = self.tables.get(&source).ok_or(TranslationError::Unavailable(source))?;
        let words = token_texts(text);
        let mut out: Vec<&str> = Vec::with_capacity(words.len());
        let mut i = 0;
        while i < words.len() {
            let longest = (1..=MAX_DICTIONARY_PHRASE.min(words.len() - i))
                .rev()
                .find_map(|n| table.get(&words[i..i + n]).map(|t| (n, t.as_str())));
            match longest {
                Some((n, english)) => {
                    if !english.is_empty() {
                        out.push(english);
                    }
                    i += n;
                }
                None => {
                    out.push(&words[i]);
                    i += 1;
                }
            }
        }
        let joined = out.join(" ");
        if joined.is_empty() && !text.trim().is_empty() {
            return Err(TranslationError::MalformedResponse {
                backend: self.name().into(),
                message: "translation is empty".into(),
            });
        }
        Ok(joined)
    }
}

type CacheKey = (String, LanguageCode, String);

/// Bounded translation cache keyed by backend name, source language and
/// content digest. Oldest entries are evicted first.
#[derive(Debug)]
pub struct TranslationCache {
    capacity: usize,
    inner: Mutex<CacheInner>,
}

#[derive(Debug, Default)]
struct CacheInner {
    map: HashMap<CacheKey, String>,
    order: VecDeque<CacheKey>,
}

impl TranslationCache {
    pub fn new(capacity: usize) -> Self {
        TranslationCache {
            capacity,
            inner: Mutex::new(CacheInner::default()),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &CacheKey) -> Option<String> {
        self.inner.lock().unwrap().map.get(key).cloned()
    }

    fn put(&self, key: CacheKey, value: String) {
        if self.capacity == 0 {
            return;
        }
        let mut inner = self.inner.lock().unwrap();
        if inner.map.insert(key.clone(), value).is_none() {
            inner.order.push_back(key);
            while inner.order.len() > self.capacity {
                if let Some(old) = inner.order.pop_front() {
                    inner.map.remove(&old);
                }
            }
        }
    }
}

/// The translation front-stage: English passes through untouched, anything
/// else goes to the backend with results cached.
pub struct CachedTranslator<B> {
    backend: B,
    cache: TranslationCache,
}

impl<B: Translator> CachedTranslator<B> {
    pub fn new(backend: B, capacity: usize) -> Self {
        CachedTranslator {
            backend,
            cache: TranslationCache::new(capacity),
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }

    pub fn translate_to_english(&self, text: &str, source: LanguageCode) -> Result<String, TranslationError> {
        if source.is_english() {
            return Ok(text.to_string());
        }
        let key = (self.backend.name().to_string(), source, input_hash(text));
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let english = self.backend.translate(text, source)?;
        self.cache.put(key, english.clone());
        Ok(english)
    }
}

impl<B: Translator> Translator for CachedTranslator<B> {
    fn name(&self) -> &str {
        self.backend.name()
    }

    fn translate(&self, text: &str, source: LanguageCode) -> Result<String, TranslationError> {
        self.translate_to_english(text, source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub auth_token: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub initial_backoff_ms: u64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig {
            endpoint: String::new(),
            auth_token: None,
            timeout_ms: 10_000,
            max_retries: 2,
            initial_backoff_ms: 200,
        }
    }
}

/// Client for an external translation service.
///
/// Sends `POST {endpoint}` with body `{"text", "source", "target": "en"}` and
/// expects `{"translation": "..."}`. Transport errors, 429 and 5xx responses
/// are retried with exponential backoff; other statuses fail immediately.
pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    text: &'a str,
    source: LanguageCode,
    target: &'static str,
}

#[derive(Deserialize)]
struct WireResponse {
    translation: String,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { config, agent }
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Result<String, (bool, String)> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.config.auth_token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let transient = status == 429 || status >= 500;
            return Err((transient, format!("HTTP {status}")));
        }
        let text = resp.body_mut().read_to_string().map_err(|e| (true, e.to_string()))?;
        Ok(text)
    }
}

impl Translator for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn translate(&self, text: &str, source: LanguageCode) -> Result<String, TranslationError> {
        let body = WireRequest {
            text,
            source,
            target: "en",
        };
        let mut attempts = 0;
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let raw = loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(raw) => break raw,
                Err((transient, message)) => {
                    if !transient || attempts > self.config.max_retries {
                        return Err(TranslationError::Backend {
                            backend: self.name().into(),
                            attempts,
                            message,
                        });
                    }
                    thread::sleep(backoff);
                    backoff *= 2;
                }
            }
        };
        let parsed: WireResponse = serde_json::from_str(&raw).map_err(|e| TranslationError::MalformedResponse {
            backend: self.name().into(),
            message: e.to_string(),
        })?;
        if parsed.translation.trim().is_empty() && !text.trim().is_empty() {
            return Err(TranslationError::MalformedResponse {
                backend: self.name().into(),
                message: "translation is empty".into(),
            });
        }
        Ok(parsed.translation)
    }
}
