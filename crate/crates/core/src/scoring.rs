//! Reading-comprehension scoring heads.
//!
//! A [`ScorerBackend`] maps a `(context, question, option)` triple to a scalar
//! logit. The multi-class head normalises the logits of all options with a
//! softmax; the binary head applies a sigmoid to each logit independently.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Question;
use crate::math;

/// Tolerance on `Σ probs = 1` for a valid [`ConfidenceDistribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// One option to be scored.
#[derive(Debug, Clone, Copy)]
pub struct OptionQuery<'a> {
    pub question_id: &'a str,
    pub option_index: usize,
    pub context: &'a str,
    pub question: &'a str,
    pub option: &'a str,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct BackendError {
    pub message: String,
}

impl BackendError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// Errors from the scoring heads, tagged with the failing question/option.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("backend failed on question {question_id} option {option_index}: {source}")]
    Backend {
        question_id: String,
        option_index: usize,
        source: BackendError,
    },
    #[error("backend returned {found} logits for {expected} options on question {question_id}")]
    LogitCount {
        question_id: String,
        expected: usize,
        found: usize,
    },
    #[error("backend returned a non-finite logit on question {question_id} option {option_index}")]
    NonFinite {
        question_id: String,
        option_index: usize,
    },
    #[error("question {0} has fewer than 2 options")]
    TooFewOptions(String),
    #[error("no backends supplied")]
    NoBackends,
}

/// A reading-comprehension model producing one logit per option.
///
/// Implementations must be deterministic: the same triple yields the same
/// logit for the lifetime of the process. Truncation of long inputs is the
/// backend's own concern and should be documented by the implementation.
pub trait ScorerBackend: Send + Sync {
    fn name(&self) -> &str;

    fn score_option(&self, query: &OptionQuery<'_>) -> Result<f64, BackendError>;

    /// Scores every option of a question. The default scores options one by
    /// one; batching backends override this.
    fn score_options(&self, queries: &[OptionQuery<'_>]) -> Result<Vec<f64>, ScoringError> {
        queries
            .iter()
            .map(|q| {
                self.score_option(q).map_err(|source| ScoringError::Backend {
                    question_id: q.question_id.into(),
                    option_index: q.option_index,
                    source,
                })
            })
            .collect()
    }

    /// Whether `score_option` may be called from several threads at once.
    /// Callers running questions in parallel serialise backends that return
    /// `false`.
    fn supports_concurrency(&self) -> bool {
        true
    }
}

fn queries(q: &Question) -> Vec<OptionQuery<'_>> {
    q.options
        .iter()
        .enumerate()
        .map(|(i, o)| OptionQuery {
            question_id: &q.id,
            option_index: i,
            context: &q.context,
            question: &q.question,
            option: o,
        })
        .collect()
}

/// Raw logits of every option of `q`, in option order.
pub fn option_logits(backend: &dyn ScorerBackend, q: &Question) -> Result<Vec<f64>, ScoringError> {
    if q.options.len() < 2 {
        return Err(ScoringError::TooFewOptions(q.id.clone()));
    }
    let qs = queries(q);
    let logits = backend.score_options(&qs)?;
    if logits.len() != qs.len() {
        return Err(ScoringError::LogitCount {
            question_id: q.id.clone(),
            expected: qs.len(),
            found: logits.len(),
        });
    }
    if let Some(i) = logits.iter().position(|l| !l.is_finite()) {
        return Err(ScoringError::NonFinite {
            question_id: q.id.clone(),
            option_index: i,
        });
    }
    Ok(logits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Single,
    Ensemble,
}

/// Per-option probabilities from the multi-class head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceDistribution {
    pub probs: Vec<f64>,
    pub source: Source,
}

impl ConfidenceDistribution {
    pub fn is_valid(&self) -> bool {
        !self.probs.is_empty()
            && self.probs.iter().all(|p| (0.0..=1.0).contains(p))
            && (self.probs.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Numerically stable softmax: logits are shifted by their maximum first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| math::exp(l - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn sigmoid(logit: f64) -> f64 {
    if logit >= 0.0 {
        1.0 / (1.0 + math::exp(-logit))
    } else {
        let e = math::exp(logit);
        e / (1.0 + e)
    }
}

/// Multi-class head: softmax over the option logits.
pub fn multiclass_confidences(
    backend: &dyn ScorerBackend,
    q: &Question,
) -> Result<ConfidenceDistribution, ScoringError> {
    let logits = option_logits(backend, q)?;
    Ok(ConfidenceDistribution {
        probs: softmax(&logits),
        source: Source::Single,
    })
}

/// Probability that a single option is correct, from the binary head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessProbability {
    pub p_c: f64,
    pub option_index: usize,
}

/// Binary head: sigmoid of the logit of one option.
pub fn binary_correctness_prob(
    backend: &dyn ScorerBackend,
    query: &OptionQuery<'_>,
) -> Result<CorrectnessProbability, ScoringError> {
    let logit = backend
        .score_option(query)
        .map_err(|source| ScoringError::Backend {
            question_id: query.question_id.into(),
            option_index: query.option_index,
            source,
        })?;
    if !logit.is_finite() {
        return Err(ScoringError::NonFinite {
            question_id: query.question_id.into(),
            option_index: query.option_index,
        });
    }
    Ok(CorrectnessProbability {
        p_c: sigmoid(logit),
        option_index: query.option_index,
    })
}

/// Element-wise arithmetic mean of equal-length rows.
///
/// Computed as a running mean so that averaging identical rows returns the
/// row bit for bit.
pub(crate) fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut mean = rows[0].clone();
    for (k, row) in rows.iter().enumerate().skip(1) {
        let n = (k + 1) as f64;
        for (m, x) in mean.iter_mut().zip(row) {
            *m += (x - *m) / n;
        }
    }
    mean
}

/// Both heads evaluated from one pass over the backends.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs {
    /// Mean of each backend's softmax output.
    pub confidences: ConfidenceDistribution,
    /// Softmax output of the first backend alone.
    pub single: ConfidenceDistribution,
    /// Mean over backends of the sigmoid of each option logit.
    pub correctness: Vec<f64>,
}

/// Runs every backend once on `q` and derives both heads from the logits.
pub fn score_question(
    backends: &[&dyn ScorerBackend],
    q: &Question,
) -> Result<HeadOutputs, ScoringError> {
    if backends.is_empty() {
        return Err(ScoringError::NoBackends);
    }
    let mut probs = Vec::with_capacity(backends.len());
    let mut binary = Vec::with_capacity(backends.len());
    for b in backends {
        let logits = option_logits(*b, q)?;
        probs.push(softmax(&logits));
        binary.push(logits.iter().map(|l| sigmoid(*l)).collect::<Vec<_>>());
    }
    let single = ConfidenceDistribution {
        probs: probs[0].clone(),
        source: Source::Single,
    };
    let confidences = if backends.len() == 1 {
        single.clone()
    } else {
        ConfidenceDistribution {
            probs: mean_rows(&probs),
            source: Source::Ensemble,
        }
    };
    let correctness = if binary.len() == 1 {
        binary.pop().unwrap_or_default()
    } else {
        mean_rows(&binary)
    };
    Ok(HeadOutputs {
        confidences,
        single,
        correctness,
    })
}

/// Per-option mean of each backend's multi-class output.
pub fn ensemble_confidences(
    backends: &[&dyn ScorerBackend],
    q: &Question,
) -> Result<ConfidenceDistribution, ScoringError> {
    Ok(score_question(backends, q)?.confidences)
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predict_answer(dist: &ConfidenceDistribution) -> usize {
    let mut best = 0;
    for (i, p) in dist.probs.iter().enumerate() {
        if *p > dist.probs[best] {
            best = i;
        }
    }
    best
}

/// Test double returning logits from a fixed table.
///
/// Lookups are keyed on `(question id, option index)`. A separate table can be
/// supplied for queries whose context is empty, which lets tests model a
/// system that behaves differently without the passage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StubBackend {
    name: String,
    table: BTreeMap<(String, usize), f64>,
    context_free: BTreeMap<(String, usize), f64>,
    default_logit: f64,
    concurrent: bool,
}

impl StubBackend {
    pub fn new(name: impl Into<String>, default_logit: f64) -> Self {
        Self {
            name: name.into(),
            default_logit,
            concurrent: true,
            ..Self::default()
        }
    }

    pub fn set(&mut self, question_id: impl Into<String>, option_index: usize, logit: f64) {
        self.table.insert((question_id.into(), option_index), logit);
    }

    /// Sets every option logit of one question.
    pub fn set_row(&mut self, question_id: &str, logits: &[f64]) {
        for (i, l) in logits.iter().enumerate() {
            self.set(question_id, i, *l);
        }
    }

    pub fn with_row(mut self, question_id: &str, logits: &[f64]) -> Self {
        self.set_row(question_id, logits);
        self
    }

    pub fn set_context_free_row(&mut self, question_id: &str, logits: &[f64]) {
        for (i, l) in logits.iter().enumerate() {
            self.context_free.insert((question_id.into(), i), *l);
        }
    }

    pub fn set_concurrent(&mut self, concurrent: bool) {
        self.concurrent = concurrent;
    }

    pub fn default_logit(&self) -> f64 {
        self.default_logit
    }

    pub fn lookup(&self, question_id: &str, option_index: usize, context_free: bool) -> f64 {
        let key = (String::from(question_id), option_index);
        if context_free {
            if let Some(l) = self.context_free.get(&key) {
                return *l;
            }
        }
        self.table.get(&key).copied().unwrap_or(self.default_logit)
    }
}

impl ScorerBackend for StubBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_option(&self, query: &OptionQuery<'_>) -> Result<f64, BackendError> {
        Ok(self.lookup(
            query.question_id,
            query.option_index,
            query.context.is_empty(),
        ))
    }

    fn supports_concurrency(&self) -> bool {
        self.concurrent
    }
}
