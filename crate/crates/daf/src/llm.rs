//! Language-model clients for probing: an OpenAI-compatible HTTP client, a
//! fixture replay client, and a content-addressed response cache.
//!
//! Environment variables read by [`HttpLlm::from_env`]:
//!
//! * `DAF_LLM_URL`: chat-completions endpoint, e.g.
//!   `https://api.openai.com/v1/chat/completions`
//! * `DAF_LLM_API_KEY`: bearer token (optional for local servers)
//! * `DAF_LLM_MODEL`: model name, default `gpt-3.5-turbo`

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use daf_core::corpus::QuestionSet;
use daf_core::probing::{LlmClient, LlmError, ProbeDirective, ProbeRequest, PromptTemplate, ScriptedClient};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DafError, Result};

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

pub struct HttpLlm {
    url: String,
    api_key: Option<String>,
    model: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: String,
}

impl HttpLlm {
    pub fn new(url: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key,
            model: model.into(),
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(120)))
                .build()
                .new_agent(),
        }
    }

    pub fn from_env() -> Result<Self> {
        let url = std::env::var("DAF_LLM_URL")
            .map_err(|_| DafError::Config("DAF_LLM_URL is not set; use --mock or --offline".into()))?;
        let key = std::env::var("DAF_LLM_API_KEY").ok().filter(|k| !k.is_empty());
        let model = std::env::var("DAF_LLM_MODEL").unwrap_or_else(|_| DEFAULT_MODEL.into());
        Ok(Self::new(url, key, model))
    }
}

impl LlmClient for HttpLlm {
    fn complete(&self, request: &ProbeRequest<'_>) -> std::result::Result<String, LlmError> {
        let body = ChatRequest {
            model: &self.model,
            messages: [ChatMessage {
                role: "user",
                content: request.prompt,
            }],
            temperature: 0.0,
        };
        let mut req = self.agent.post(&self.url);
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| LlmError(format!("{}: {e}", self.url)))?;
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError(format!("bad completion response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError("completion had no choices".into()))
    }
}

/// One line of a mock fixture. Several lines for the same question and
/// directive are replayed as successive attempts.
#[derive(Debug, Clone, Deserialize)]
struct FixtureLine {
    id: String,
    directive: ProbeDirective,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    error: Option<String>,
}

/// Reads a JSONL fixture of `{"id", "directive": {...} | "plaus+", "response"}`
/// lines. A line with `error` makes that attempt fail outright.
pub fn load_fixture(path: &Path) -> Result<ScriptedClient> {
    let f = fs::File::open(path).map_err(|e| DafError::io(path, e))?;
    let mut client = ScriptedClient::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| DafError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value = serde_json::from_str(&line).map_err(|e| DafError::Record {
            path: path.to_path_buf(),
            record: format!("line {}", i + 1),
            message: e.to_string(),
        })?;
        // accept the short tag as well as the structured form
        if let Some(tag) = value.get("directive").and_then(|d| d.as_str()) {
            let d: ProbeDirective = tag.parse().map_err(|e: daf_core::probing::ParseDirectiveError| DafError::Record {
                path: path.to_path_buf(),
                record: format!("line {}", i + 1),
                message: e.to_string(),
            })?;
            value["directive"] = serde_json::to_value(d).expect("directive serialises");
        }
        let rec: FixtureLine = serde_json::from_value(value).map_err(|e| DafError::Record {
            path: path.to_path_buf(),
            record: format!("line {}", i + 1),
            message: e.to_string(),
        })?;
        let reply = match (rec.response, rec.error) {
            (_, Some(err)) => Err(LlmError(err)),
            (Some(r), None) => Ok(r),
            (None, None) => Ok(String::new()),
        };
        client.push(&rec.id, rec.directive, reply);
    }
    Ok(client)
}

/// Cache key: SHA-256 over question id, directive tag, template hash and
/// attempt number.
pub fn cache_key(question_id: &str, directive: ProbeDirective, template_hash: &str, attempt: usize) -> String {
    let mut h = Sha256::new();
    for part in [question_id, directive.tag(), template_hash, &attempt.to_string()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

pub fn template_hash(template: &PromptTemplate) -> String {
    hex::encode(Sha256::digest(template.text.as_bytes()))
}

/// Directory of `<key>.txt` response records.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| DafError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.txt"))
    }

    pub fn get(&self, key: &str) -> Result<Option<String>> {
        let p = self.path(key);
        match fs::read_to_string(&p) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(DafError::io(p, e)),
        }
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place, so readers never see a partial record.
    pub fn put(&self, key: &str, text: &str) -> Result<()> {
        let p = self.path(key);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| DafError::io(&self.dir, e))?;
        tmp.write_all(text.as_bytes()).map_err(|e| DafError::io(tmp.path(), e))?;
        tmp.persist(&p).map_err(|e| DafError::io(&p, e.error))?;
        Ok(())
    }
}

/// Serves completions from the cache, asking `inner` on a miss and storing
/// the reply. In offline mode a miss is an error.
pub struct CachedClient<'a> {
    inner: Option<&'a (dyn LlmClient + Sync)>,
    cache: ResponseCache,
    template_hash: String,
    misses: Mutex<usize>,
}

impl<'a> CachedClient<'a> {
    pub fn new(inner: Option<&'a (dyn LlmClient + Sync)>, cache: ResponseCache, template: &PromptTemplate) -> Self {
        Self {
            inner,
            cache,
            template_hash: template_hash(template),
            misses: Mutex::new(0),
        }
    }

    /// Live requests made so far.
    pub fn misses(&self) -> usize {
        *self.misses.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Fetches the first attempt of every question with at most `parallelism`
    /// requests in flight. Later attempts, needed only when a reply fails
    /// to parse, are fetched lazily.
    pub fn prefetch(
        &self,
        set: &QuestionSet,
        directive: ProbeDirective,
        template: &PromptTemplate,
        parallelism: usize,
    ) -> std::result::Result<(), LlmError> {
        if self.inner.is_none() {
            return Ok(());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism.max(1))
            .build()
            .map_err(|e| LlmError(e.to_string()))?;
        pool.install(|| {
            set.questions().par_iter().try_for_each(|q| {
                let prompt = template.render(q, directive);
                self.complete(&ProbeRequest {
                    question_id: &q.id,
                    directive,
                    attempt: 0,
                    prompt: &prompt,
                })
                .map(|_| ())
            })
        })
    }
}

impl LlmClient for CachedClient<'_> {
    fn complete(&self, request: &ProbeRequest<'_>) -> std::result::Result<String, LlmError> {
        let key = cache_key(request.question_id, request.directive, &self.template_hash, request.attempt);
        if let Some(hit) = self.cache.get(&key).map_err(|e| LlmError(e.to_string()))? {
            return Ok(hit);
        }
        let Some(inner) = self.inner else {
            return Err(LlmError(format!(
                "no cached response for question {} ({}, attempt {}) in offline mode",
                request.question_id, request.directive, request.attempt
            )));
        };
        let reply = inner.complete(request)?;
        self.cache.put(&key, &reply).map_err(|e| LlmError(e.to_string()))?;
        *self.misses.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        Ok(reply)
    }
}

/// Keeps the mock and echo clients behind one type for the CLI.
pub enum AnyClient {
    Http(HttpLlm),
    Scripted(ScriptedClient),
    Echo(daf_core::probing::EchoClient),
}

impl LlmClient for AnyClient {
    fn complete(&self, request: &ProbeRequest<'_>) -> std::result::Result<String, LlmError> {
        match self {
            AnyClient::Http(c) => c.complete(request),
            AnyClient::Scripted(c) => c.complete(request),
            AnyClient::Echo(c) => c.complete(request),
        }
    }
}
