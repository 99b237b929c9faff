//! The three distractor quality scores.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Question, QuestionSet};
use crate::scoring::{self, ConfidenceDistribution, ScorerBackend, ScoringError};

/// Threshold at the best-F1 operating point on RACE++.
pub const TAU_RACE: f64 = 0.25;
/// Threshold at the best-F1 operating point on CMCQRD.
pub const TAU_CMCQRD: f64 = 0.04;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("p_c {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("tau {0} outside [0, 1]")]
    TauOutOfRange(f64),
    #[error("question set is empty")]
    EmptySet,
    #[error("question {0} has no distractors")]
    NoDistractors(String),
    #[error("question {0} has no candidate distribution")]
    MissingCandidateDistribution(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Incorrect,
    Correct,
}

/// Outcome of the incorrectness test for one option.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncorrectnessDecision {
    pub label: Verdict,
    pub p_c: f64,
    pub tau: f64,
}

pub(crate) fn check_tau(tau: f64) -> Result<(), MetricError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(MetricError::TauOutOfRange(tau))
    }
}

/// An option is incorrect iff `p_c < tau`; `p_c == tau` counts as correct.
pub fn incorrectness_decision(p_c: f64, tau: f64) -> Result<IncorrectnessDecision, MetricError> {
    if !(0.0..=1.0).contains(&p_c) {
        return Err(MetricError::ProbabilityOutOfRange(p_c));
    }
    check_tau(tau)?;
    Ok(IncorrectnessDecision {
        label: verdict(p_c, tau),
        p_c,
        tau,
    })
}

#[inline]
pub(crate) fn verdict(p_c: f64, tau: f64) -> Verdict {
    if p_c < tau {
        Verdict::Incorrect
    } else {
        Verdict::Correct
    }
}

/// Percentage of pooled distractor scores below `tau`.
pub fn pooled_incorrectness_rate<I>(p_c: I, tau: f64) -> Option<f64>
where
    I: IntoIterator<Item = f64>,
{
    let (mut below, mut total) = (0usize, 0usize);
    for p in p_c {
        total += 1;
        if p < tau {
            below += 1;
        }
    }
    (total > 0).then(|| percentage(below, total))
}

pub(crate) fn percentage(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

fn distractor_scores(
    set: &QuestionSet,
    backends: &[&dyn ScorerBackend],
) -> Result<Vec<Vec<f64>>, MetricError> {
    if set.is_empty() {
        return Err(MetricError::EmptySet);
    }
    set.questions()
        .iter()
        .map(|q| {
            if q.distractor_count() == 0 {
                return Err(MetricError::NoDistractors(q.id.clone()));
            }
            let heads = scoring::score_question(backends, q)?;
            Ok(q.distractor_indices().map(|i| heads.correctness[i]).collect())
        })
        .collect()
}

/// Percentage of all distractors in `set` judged incorrect at `tau`, pooled
/// across questions.
pub fn incorrectness_rate(
    set: &QuestionSet,
    backend: &dyn ScorerBackend,
    tau: f64,
) -> Result<f64, MetricError> {
    ensemble_incorrectness_rate(set, &[backend], tau)
}

/// [`incorrectness_rate`] with `p_c` averaged over several backends.
pub fn ensemble_incorrectness_rate(
    set: &QuestionSet,
    backends: &[&dyn ScorerBackend],
    tau: f64,
) -> Result<f64, MetricError> {
    check_tau(tau)?;
    let scores = distractor_scores(set, backends)?;
    pooled_incorrectness_rate(scores.into_iter().flatten(), tau).ok_or(MetricError::EmptySet)
}

/// Per-question incorrectness percentages averaged over questions. Reported
/// alongside the pooled rate, which is the headline figure.
pub fn per_question_incorrectness_rate(
    set: &QuestionSet,
    backends: &[&dyn ScorerBackend],
    tau: f64,
) -> Result<f64, MetricError> {
    check_tau(tau)?;
    let scores = distractor_scores(set, backends)?;
    let n = scores.len() as f64;
    let sum: f64 = scores
        .into_iter()
        .filter_map(|row| pooled_incorrectness_rate(row, tau))
        .sum();
    Ok(sum / n)
}

/// Probability mass on the distractors: one minus the largest probability.
pub fn plausibility(dist: &ConfidenceDistribution) -> f64 {
    let max = dist.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    1.0 - max
}

/// Fraction of human candidates choosing a distractor.
pub fn candidate_plausibility(q: &Question) -> Result<f64, MetricError> {
    let dist = q
        .candidate_distribution
        .as_ref()
        .ok_or_else(|| MetricError::MissingCandidateDistribution(q.id.clone()))?;
    Ok(1.0 - dist[q.answer_index])
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquivalenceError {
    #[error("equivalence scorer failed: {0}")]
    Scorer(String),
    #[error("equivalence score {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// Semantic equivalence of a candidate answer to a reference answer, given
/// the question. Scores lie in `[0, 1]`; 1 means equivalent. The passage is
/// never supplied.
pub trait EquivalenceScorer: Send + Sync {
    fn name(&self) -> &str;

    fn equivalence(
        &self,
        candidate: &str,
        reference: &str,
        question: &str,
    ) -> Result<f64, EquivalenceError>;
}

fn checked(scorer: &dyn EquivalenceScorer, a: &str, b: &str, q: &str) -> Result<f64, EquivalenceError> {
    let e = scorer.equivalence(a, b, q)?;
    if (0.0..=1.0).contains(&e) {
        Ok(e)
    } else {
        Err(EquivalenceError::OutOfRange(e))
    }
}

/// Mean of the equivalence score in both orderings.
pub fn symmetric_equivalence(
    scorer: &dyn EquivalenceScorer,
    a: &str,
    b: &str,
    question: &str,
) -> Result<f64, EquivalenceError> {
    let ab = checked(scorer, a, b, question)?;
    let ba = checked(scorer, b, a, question)?;
    Ok(symmetrize(ab, ba))
}

// addition commutes exactly in IEEE arithmetic, so the result does not depend
// on argument order
#[inline]
fn symmetrize(ab: f64, ba: f64) -> f64 {
    (ab + ba) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityScore {
    /// `None` when fewer than two distractors are present.
    pub value: Option<f64>,
    /// Symmetrised pairwise equivalences; the diagonal is fixed at 1.
    pub pairwise_matrix: Vec<Vec<f64>>,
}

impl DiversityScore {
    pub fn undefined(k: usize) -> Self {
        Self {
            value: None,
            pairwise_matrix: identity(k),
        }
    }
}

fn identity(k: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; k]; k];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

/// One minus the mean equivalence over ordered pairs of distinct distractors.
pub fn diversity(
    scorer: &dyn EquivalenceScorer,
    distractors: &[&str],
    question: &str,
) -> Result<DiversityScore, EquivalenceError> {
    let k = distractors.len();
    if k < 2 {
        return Ok(DiversityScore::undefined(k));
    }
    let mut raw = vec![vec![0.0; k]; k];
    for (i, a) in distractors.iter().enumerate() {
        for (j, b) in distractors.iter().enumerate() {
            if i != j {
                raw[i][j] = checked(scorer, a, b, question)?;
            }
        }
    }
    let mut sum = 0.0;
    for (i, row) in raw.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            if i != j {
                sum += e;
            }
        }
    }
    let value = 1.0 - sum / (k * k - k) as f64;
    let mut matrix = identity(k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                matrix[i][j] = symmetrize(raw[i][j], raw[j][i]);
            }
        }
    }
    Ok(DiversityScore {
        value: Some(value),
        pairwise_matrix: matrix,
    })
}

/// Diversity computed from [`symmetric_equivalence`] over unordered pairs.
/// Algebraically identical to [`diversity`].
pub fn diversity_unordered(
    scorer: &dyn EquivalenceScorer,
    distractors: &[&str],
    question: &str,
) -> Result<Option<f64>, EquivalenceError> {
    let k = distractors.len();
    if k < 2 {
        return Ok(None);
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..k {
        for j in (i + 1)..k {
            sum += symmetric_equivalence(scorer, distractors[i], distractors[j], question)?;
            pairs += 1;
        }
    }
    Ok(Some(1.0 - sum / pairs as f64))
}

/// Share of the reference's tokens that also occur in the candidate.
///
/// Tokens are lowercased alphanumeric runs. Identical strings score 1. The
/// score is asymmetric, which exercises the two-ordering average.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenOverlapScorer;

fn tokens(s: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.insert(core::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.insert(cur);
    }
    out
}

impl EquivalenceScorer for TokenOverlapScorer {
    fn name(&self) -> &str {
        "overlap"
    }

    fn equivalence(
        &self,
        candidate: &str,
        reference: &str,
        _question: &str,
    ) -> Result<f64, EquivalenceError> {
        if candidate == reference {
            return Ok(1.0);
        }
        let c = tokens(candidate);
        let r = tokens(reference);
        if r.is_empty() {
            return Ok(if c.is_empty() { 1.0 } else { 0.0 });
        }
        let shared = r.intersection(&c).count();
        Ok(shared as f64 / r.len() as f64)
    }
}

/// Equivalence scores from a fixed table of ordered `(candidate, reference)`
/// pairs. Identical strings score 1 unless the table says otherwise.
#[derive(Debug, Clone, Default)]
pub struct StubEquivalence {
    table: BTreeMap<(String, String), f64>,
    default_score: f64,
}

impl StubEquivalence {
    pub fn new(default_score: f64) -> Self {
        Self {
            table: BTreeMap::new(),
            default_score,
        }
    }

    pub fn set(&mut self, candidate: &str, reference: &str, score: f64) {
        self.table.insert((candidate.into(), reference.into()), score);
    }

    pub fn with(mut self, candidate: &str, reference: &str, score: f64) -> Self {
        self.set(candidate, reference, score);
        self
    }
}

impl EquivalenceScorer for StubEquivalence {
    fn name(&self) -> &str {
        "stub"
    }

    fn equivalence(
        &self,
        candidate: &str,
        reference: &str,
        _question: &str,
    ) -> Result<f64, EquivalenceError> {
        let key = (String::from(candidate), String::from(reference));
        Ok(match self.table.get(&key) {
            Some(v) => *v,
            None if candidate == reference => 1.0,
            None => self.default_score,
        })
    }
}
