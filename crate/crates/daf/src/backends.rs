//! Backend registries: reading-comprehension scorers and equivalence scorers
//! resolved by name from the run configuration.
//!
//! A backend spec is either a name defined in the config's `[backends]`
//! table or one of the shorthands `stub:<path>` and `http:<url>`. The same
//! applies to equivalence scorers, with the extra built-in `overlap`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use daf_core::metrics::{EquivalenceError, EquivalenceScorer, StubEquivalence, TokenOverlapScorer};
use daf_core::scoring::{BackendError, OptionQuery, ScorerBackend, ScoringError, StubBackend};
use serde::{Deserialize, Serialize};

use crate::error::{DafError, Result};

/// How to construct one scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// Logit table stored as JSON, see [`StubTable`].
    Stub { path: PathBuf },
    /// A model server speaking the JSON protocol of [`HttpBackend`].
    Http {
        url: String,
        #[serde(default)]
        timeout_secs: Option<u64>,
        /// Whether the server accepts overlapping requests.
        #[serde(default = "yes")]
        concurrent: bool,
    },
}

fn yes() -> bool {
    true
}

impl BackendSpec {
    /// Parses the `stub:<path>` / `http:<url>` shorthand.
    pub fn from_shorthand(s: &str) -> Option<Self> {
        if let Some(p) = s.strip_prefix("stub:") {
            return Some(BackendSpec::Stub { path: p.into() });
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Some(BackendSpec::Http {
                url: s.into(),
                timeout_secs: None,
                concurrent: true,
            });
        }
        s.strip_prefix("http:").map(|u| BackendSpec::Http {
            url: u.into(),
            timeout_secs: None,
            concurrent: true,
        })
    }
}

/// On-disk form of a [`StubBackend`].
///
/// ```json
/// {"name": "m1", "default_logit": 0.0,
///  "logits": {"q1": [2.0, 0.5, -1.0, 0.0]},
///  "context_free_logits": {"q1": [0.0, 0.0, 0.0, 0.0]}}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubTable {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub default_logit: f64,
    #[serde(default)]
    pub logits: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub context_free_logits: BTreeMap<String, Vec<f64>>,
    #[serde(default = "yes")]
    pub concurrent: bool,
}

impl StubTable {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| DafError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DafError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn into_backend(self, fallback_name: &str) -> StubBackend {
        let mut b = StubBackend::new(self.name.unwrap_or_else(|| fallback_name.into()), self.default_logit);
        for (id, row) in &self.logits {
            b.set_row(id, row);
        }
        for (id, row) in &self.context_free_logits {
            b.set_context_free_row(id, row);
        }
        b.set_concurrent(self.concurrent);
        b
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    id: &'a str,
    context: &'a str,
    question: &'a str,
    options: Vec<&'a str>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    logits: Vec<f64>,
}

/// Client for a model server.
///
/// Each question is sent as one POST of
/// `{"id", "context", "question", "options": [..]}` and the server answers
/// `{"logits": [..]}` with one logit per option. Tokenisation and truncation
/// to the model's input budget happen on the server.
pub struct HttpBackend {
    name: String,
    url: String,
    agent: ureq::Agent,
    concurrent: bool,
}

impl HttpBackend {
    pub fn new(name: impl Into<String>, url: impl Into<String>, timeout: Duration, concurrent: bool) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .new_agent();
        Self {
            name: name.into(),
            url: url.into(),
            agent,
            concurrent,
        }
    }

    fn request(&self, queries: &[OptionQuery<'_>]) -> std::result::Result<Vec<f64>, BackendError> {
        let first = queries.first().ok_or_else(|| BackendError::new("no options"))?;
        let body = ScoreRequest {
            id: first.question_id,
            context: first.context,
            question: first.question,
            options: queries.iter().map(|q| q.option).collect(),
        };
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| BackendError::new(format!("{}: {e}", self.url)))?;
        let parsed: ScoreResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::new(format!("{}: bad response: {e}", self.url)))?;
        Ok(parsed.logits)
    }
}

impl ScorerBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_option(&self, query: &OptionQuery<'_>) -> std::result::Result<f64, BackendError> {
        let logits = self.request(std::slice::from_ref(query))?;
        logits
            .first()
            .copied()
            .ok_or_else(|| BackendError::new("empty logits"))
    }

    fn score_options(&self, queries: &[OptionQuery<'_>]) -> std::result::Result<Vec<f64>, ScoringError> {
        self.request(queries).map_err(|source| ScoringError::Backend {
            question_id: queries.first().map(|q| q.question_id.to_string()).unwrap_or_default(),
            option_index: 0,
            source,
        })
    }

    fn supports_concurrency(&self) -> bool {
        self.concurrent
    }
}

/// Serialises every call to a backend that does not allow concurrent use.
pub struct Serialized<B> {
    inner: B,
    lock: Mutex<()>,
}

impl<B: ScorerBackend> Serialized<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            lock: Mutex::new(()),
        }
    }
}

impl<B: ScorerBackend> ScorerBackend for Serialized<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn score_option(&self, query: &OptionQuery<'_>) -> std::result::Result<f64, BackendError> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        self.inner.score_option(query)
    }

    fn score_options(&self, queries: &[OptionQuery<'_>]) -> std::result::Result<Vec<f64>, ScoringError> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        self.inner.score_options(queries)
    }

    fn supports_concurrency(&self) -> bool {
        true
    }
}

/// Boxes a backend, wrapping it in [`Serialized`] when it forbids
/// concurrent calls.
pub fn guarded<B: ScorerBackend + 'static>(backend: B) -> Box<dyn ScorerBackend> {
    if backend.supports_concurrency() {
        Box::new(backend)
    } else {
        Box::new(Serialized::new(backend))
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Resolves one scorer name against the named specs.
pub fn open_backend(name: &str, specs: &BTreeMap<String, BackendSpec>) -> Result<Box<dyn ScorerBackend>> {
    let spec = match specs.get(name) {
        Some(s) => s.clone(),
        None => BackendSpec::from_shorthand(name).ok_or_else(|| DafError::UnknownBackend(name.into()))?,
    };
    Ok(match spec {
        BackendSpec::Stub { path } => {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| name.into());
            let fallback = if specs.contains_key(name) { name.to_string() } else { stem };
            guarded(StubTable::load(&path)?.into_backend(&fallback))
        }
        BackendSpec::Http {
            url,
            timeout_secs,
            concurrent,
        } => guarded(HttpBackend::new(
            name,
            url,
            timeout_secs.map(Duration::from_secs).unwrap_or(DEFAULT_TIMEOUT),
            concurrent,
        )),
    })
}

pub fn open_backends(names: &[String], specs: &BTreeMap<String, BackendSpec>) -> Result<Vec<Box<dyn ScorerBackend>>> {
    names.iter().map(|n| open_backend(n, specs)).collect()
}

/// Borrowed view used by the core APIs.
pub fn as_refs(backends: &[Box<dyn ScorerBackend>]) -> Vec<&dyn ScorerBackend> {
    backends.iter().map(|b| b.as_ref()).collect()
}

/// On-disk form of a [`StubEquivalence`]: `{"default": 0.0, "pairs":
/// [["candidate", "reference", 0.5], ...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceTable {
    #[serde(default)]
    pub default: f64,
    #[serde(default)]
    pub pairs: Vec<(String, String, f64)>,
}

impl EquivalenceTable {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| DafError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DafError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn into_scorer(self) -> StubEquivalence {
        let mut s = StubEquivalence::new(self.default);
        for (c, r, v) in &self.pairs {
            s.set(c, r, *v);
        }
        s
    }
}

#[derive(Serialize)]
struct EquivalenceRequest<'a> {
    candidate: &'a str,
    reference: &'a str,
    question: &'a str,
}

#[derive(Deserialize)]
struct EquivalenceResponse {
    score: f64,
}

/// A learned equivalence model behind HTTP. POST
/// `{"candidate", "reference", "question"}`, answer `{"score": e}`.
pub struct HttpEquivalence {
    url: String,
    agent: ureq::Agent,
}

impl HttpEquivalence {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .build()
                .new_agent(),
        }
    }
}

impl EquivalenceScorer for HttpEquivalence {
    fn name(&self) -> &str {
        &self.url
    }

    fn equivalence(&self, candidate: &str, reference: &str, question: &str) -> std::result::Result<f64, EquivalenceError> {
        let body = EquivalenceRequest {
            candidate,
            reference,
            question,
        };
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| EquivalenceError::Scorer(format!("{}: {e}", self.url)))?;
        let parsed: EquivalenceResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| EquivalenceError::Scorer(format!("{}: bad response: {e}", self.url)))?;
        Ok(parsed.score)
    }
}

pub fn open_equivalence(name: &str) -> Result<Box<dyn EquivalenceScorer>> {
    if name == "overlap" {
        return Ok(Box::new(TokenOverlapScorer));
    }
    if let Some(p) = name.strip_prefix("stub:") {
        return Ok(Box::new(EquivalenceTable::load(Path::new(p))?.into_scorer()));
    }
    if name.starts_with("http://") || name.starts_with("https://") {
        return Ok(Box::new(HttpEquivalence::new(name, DEFAULT_TIMEOUT)));
    }
    if let Some(u) = name.strip_prefix("http:") {
        return Ok(Box::new(HttpEquivalence::new(u, DEFAULT_TIMEOUT)));
    }
    Err(DafError::UnknownEquivalence(name.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use daf_core::corpus::Question;
    use daf_core::scoring::multiclass_confidences;

    #[test]
    fn shorthand() {
        assert_eq!(
            BackendSpec::from_shorthand("stub:a/b.json"),
            Some(BackendSpec::Stub { path: "a/b.json".into() })
        );
        assert!(matches!(
            BackendSpec::from_shorthand("http://localhost:9000/score"),
            Some(BackendSpec::Http { ref url, .. }) if url == "http://localhost:9000/score"
        ));
        assert_eq!(BackendSpec::from_shorthand("electra"), None);
    }

    #[test]
    fn stub_table_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m1.json");
        fs::write(&p, r#"{"default_logit": -1.0, "logits": {"q": [0.6931471805599453, 0, 0, 0]}, "concurrent": false}"#).unwrap();
        let spec = format!("stub:{}", p.display());
        let b = open_backend(&spec, &BTreeMap::new()).unwrap();
        assert_eq!(b.name(), "m1");
        let q = Question::new("q", "c", "?", vec!["a".into(), "b".into(), "c".into(), "d".into()], 0);
        let d = multiclass_confidences(b.as_ref(), &q).unwrap();
        assert!((d.probs[0] - 0.4).abs() < 1e-12);
        // the wrapper makes the backend safe to share
        assert!(b.supports_concurrency());
    }

    #[test]
    fn named_spec_wins_over_shorthand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        fs::write(&p, "{}").unwrap();
        let specs = BTreeMap::from([("main".to_string(), BackendSpec::Stub { path: p })]);
        assert_eq!(open_backend("main", &specs).unwrap().name(), "main");
        assert!(matches!(open_backend("other", &specs), Err(DafError::UnknownBackend(_))));
    }

    #[test]
    fn equivalence_registry() {
        assert_eq!(open_equivalence("overlap").unwrap().name(), "overlap");
        assert!(open_equivalence("bem").is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.json");
        fs::write(&p, r#"{"default": 0.1, "pairs": [["a", "b", 0.6], ["b", "a", 0.4]]}"#).unwrap();
        let s = open_equivalence(&format!("stub:{}", p.display())).unwrap();
        assert_eq!(s.equivalence("a", "b", "q").unwrap(), 0.6);
        assert_eq!(s.equivalence("a", "c", "q").unwrap(), 0.1);
    }
}
