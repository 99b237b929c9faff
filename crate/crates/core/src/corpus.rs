//! Questions, question sets and corpus statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math;

/// Allowed deviation of a candidate distribution's sum from 1 before it is
/// rejected. Distributions inside the tolerance are rescaled to sum to 1.
pub const CANDIDATE_SUM_TOLERANCE: f64 = 0.01;

// absorbs rounding in the sum itself, e.g. 0.59 + 0.2 + 0.1 + 0.1
const SUM_SLACK: f64 = 1e-12;

fn sum_within_tolerance(sum: f64) -> bool {
    (sum - 1.0).abs() <= CANDIDATE_SUM_TOLERANCE + SUM_SLACK
}

/// Level bucket used by [`corpus_stats`] for questions without a level tag.
pub const UNTAGGED_LEVEL: &str = "untagged";

/// A multiple-choice reading-comprehension question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub context: String,
    pub question: String,
    pub options: Vec<String>,
    /// 0-based position of the correct answer in `options`.
    pub answer_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
    /// Fraction of human candidates choosing each option.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_distribution: Option<Vec<f64>>,
}

impl Question {
    pub fn new(
        id: impl Into<String>,
        context: impl Into<String>,
        question: impl Into<String>,
        options: Vec<String>,
        answer_index: usize,
    ) -> Self {
        Self {
            id: id.into(),
            context: context.into(),
            question: question.into(),
            options,
            answer_index,
            level: None,
            candidate_distribution: None,
        }
    }

    pub fn with_level(mut self, level: impl Into<String>) -> Self {
        self.level = Some(level.into());
        self
    }

    pub fn with_candidate_distribution(mut self, distribution: Vec<f64>) -> Self {
        self.candidate_distribution = Some(distribution);
        self
    }

    pub fn answer(&self) -> &str {
        &self.options[self.answer_index]
    }

    /// Indices of every option except the answer, in option order.
    pub fn distractor_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.options.len()).filter(move |&i| i != self.answer_index)
    }

    pub fn distractors(&self) -> Vec<&str> {
        self.distractor_indices()
            .map(|i| self.options[i].as_str())
            .collect()
    }

    pub fn distractor_count(&self) -> usize {
        self.options.len().saturating_sub(1)
    }
}

/// A failed [`Question`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TooFewOptions(usize),
    AnswerIndexOutOfRange { index: usize, options: usize },
    EmptyOption(usize),
    DuplicateOptions(Vec<usize>),
    CandidateLengthMismatch { expected: usize, found: usize },
    CandidateEntryOutOfRange(usize),
    CandidateSum(String),
}

impl Violation {
    /// Duplicates are reported but do not stop a question from being loaded.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, Violation::DuplicateOptions(_))
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewOptions(n) => write!(f, "fewer than 2 options: {n}"),
            Violation::AnswerIndexOutOfRange { index, options } => {
                write!(f, "answer index out of range: {index} (options: {options})")
            }
            Violation::EmptyOption(i) => write!(f, "empty option: {i}"),
            Violation::DuplicateOptions(indices) => {
                f.write_str("duplicate options: ")?;
                for (n, i) in indices.iter().enumerate() {
                    if n > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{i}")?;
                }
                Ok(())
            }
            Violation::CandidateLengthMismatch { expected, found } => write!(
                f,
                "candidate distribution length {found} does not match {expected} options"
            ),
            Violation::CandidateEntryOutOfRange(i) => {
                write!(f, "candidate distribution entry out of range: {i}")
            }
            Violation::CandidateSum(sum) => {
                write!(f, "candidate distribution sums to {sum}, expected 1")
            }
        }
    }
}

/// Checks every [`Question`] invariant and reports each failure.
pub fn validate_question(q: &Question) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = q.options.len();
    if n < 2 {
        out.push(Violation::TooFewOptions(n));
    }
    if q.answer_index >= n {
        out.push(Violation::AnswerIndexOutOfRange {
            index: q.answer_index,
            options: n,
        });
    }
    for (i, o) in q.options.iter().enumerate() {
        if o.trim().is_empty() {
            out.push(Violation::EmptyOption(i));
        }
    }
    // group identical non-empty texts, reported in order of first occurrence
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, o) in q.options.iter().enumerate() {
        if !o.trim().is_empty() {
            groups.entry(o.as_str()).or_default().push(i);
        }
    }
    let mut dups: Vec<Vec<usize>> = groups.into_values().filter(|g| g.len() > 1).collect();
    dups.sort();
    out.extend(dups.into_iter().map(Violation::DuplicateOptions));

    if let Some(dist) = &q.candidate_distribution {
        if dist.len() != n {
            out.push(Violation::CandidateLengthMismatch {
                expected: n,
                found: dist.len(),
            });
        }
        for (i, p) in dist.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                out.push(Violation::CandidateEntryOutOfRange(i));
            }
        }
        let sum: f64 = dist.iter().sum();
        if !sum_within_tolerance(sum) {
            out.push(Violation::CandidateSum(format!("{sum}")));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("candidate distribution is empty")]
    Empty,
    #[error("candidate distribution entry {0} is negative or not finite")]
    InvalidEntry(usize),
    #[error("candidate distribution sums to {0}, outside tolerance of 1")]
    Sum(f64),
}

/// Turns a raw candidate distribution into fractions summing to 1.
///
/// Fractions whose sum is within [`CANDIDATE_SUM_TOLERANCE`] of 1 are
/// rescaled. Whole-number counts (any sum) are divided by their total.
/// Anything else is rejected.
pub fn normalize_candidate_distribution(raw: &[f64]) -> Result<Vec<f64>, DistributionError> {
    if raw.is_empty() {
        return Err(DistributionError::Empty);
    }
    for (i, v) in raw.iter().enumerate() {
        if !v.is_finite() || *v < 0.0 {
            return Err(DistributionError::InvalidEntry(i));
        }
    }
    let sum: f64 = raw.iter().sum();
    let fractions = sum_within_tolerance(sum) && raw.iter().all(|v| *v <= 1.0);
    let counts = sum > 0.0 && raw.iter().all(|v| math::trunc(*v) == *v);
    if !(fractions || counts) {
        return Err(DistributionError::Sum(sum));
    }
    if (sum - 1.0).abs() <= SUM_SLACK {
        // already normalised; returning it unchanged keeps reloads bit-identical
        return Ok(raw.to_vec());
    }
    Ok(raw.iter().map(|v| v / sum).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SetError {
    #[error("duplicate question id: {0}")]
    DuplicateId(String),
}

/// An immutable, ordered collection of questions with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionSet {
    name: String,
    questions: Vec<Question>,
    level_index: BTreeMap<String, Vec<String>>,
}

impl QuestionSet {
    pub fn new(name: impl Into<String>, questions: Vec<Question>) -> Result<Self, SetError> {
        let mut seen = BTreeSet::new();
        let mut level_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for q in &questions {
            if !seen.insert(q.id.as_str()) {
                return Err(SetError::DuplicateId(q.id.clone()));
            }
            if let Some(level) = &q.level {
                level_index
                    .entry(level.clone())
                    .or_default()
                    .push(q.id.clone());
            }
        }
        Ok(Self {
            name: name.into(),
            questions,
            level_index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    /// Map from level tag to question ids, in set order.
    pub fn level_index(&self) -> &BTreeMap<String, Vec<String>> {
        &self.level_index
    }

    pub fn into_questions(self) -> Vec<Question> {
        self.questions
    }

    /// Same questions with every context replaced by the empty string.
    pub fn without_context(&self) -> Self {
        let mut out = self.clone();
        for q in &mut out.questions {
            q.context.clear();
        }
        out
    }
}

impl<'a> IntoIterator for &'a QuestionSet {
    type Item = &'a Question;
    type IntoIter = core::slice::Iter<'a, Question>;

    fn into_iter(self) -> Self::IntoIter {
        self.questions.iter()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub questions: usize,
    pub contexts: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub levels: BTreeMap<String, LevelCounts>,
    pub total_questions: usize,
    pub total_contexts: usize,
}

/// Tallies questions and distinct contexts per level tag.
///
/// Questions without a tag are counted under [`UNTAGGED_LEVEL`], so the
/// totals are always the sum over levels.
pub fn corpus_stats(set: &QuestionSet) -> CorpusStats {
    let mut contexts: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    let mut levels: BTreeMap<String, LevelCounts> = BTreeMap::new();
    for q in set {
        let level = q.level.clone().unwrap_or_else(|| UNTAGGED_LEVEL.to_string());
        levels.entry(level.clone()).or_default().questions += 1;
        contexts.entry(level).or_default().insert(q.context.as_str());
    }
    for (level, ctx) in contexts {
        if let Some(c) = levels.get_mut(&level) {
            c.contexts = ctx.len();
        }
    }
    let total_questions = levels.values().map(|c| c.questions).sum();
    let total_contexts = levels.values().map(|c| c.contexts).sum();
    CorpusStats {
        levels,
        total_questions,
        total_contexts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn opts(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn q4() -> Question {
        Question::new("q", "c", "q", opts(&["a", "b", "c", "d"]), 1)
    }

    #[test]
    fn well_formed_question_has_no_violations() {
        assert!(validate_question(&q4()).is_empty());
    }

    #[test]
    fn duplicate_options_reported() {
        let mut q = q4();
        q.options = opts(&["a", "b", "b", "d"]);
        let v: Vec<String> = validate_question(&q).iter().map(|v| v.to_string()).collect();
        assert_eq!(v, vec!["duplicate options: 1,2"]);
        assert!(!validate_question(&q)[0].is_fatal());
    }

    #[test]
    fn empty_option_reported() {
        let mut q = q4();
        q.options[3] = String::new();
        let v: Vec<String> = validate_question(&q).iter().map(|v| v.to_string()).collect();
        assert_eq!(v, vec!["empty option: 3"]);
    }

    #[test]
    fn answer_index_out_of_range() {
        let mut q = q4();
        q.answer_index = 4;
        let v = validate_question(&q);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("answer index out of range"));
    }

    #[test]
    fn candidate_distribution_checks() {
        let q = q4().with_candidate_distribution(vec![0.5, 0.5, 0.5, 0.0]);
        let v = validate_question(&q);
        assert!(matches!(v[0], Violation::CandidateSum(_)));
        let q = q4().with_candidate_distribution(vec![0.5, 0.5]);
        assert!(matches!(
            validate_question(&q)[0],
            Violation::CandidateLengthMismatch { expected: 4, found: 2 }
        ));
    }

    #[test]
    fn renormalizes_fractions_within_tolerance() {
        let raw = [0.59, 0.20, 0.10, 0.10];
        let got = normalize_candidate_distribution(&raw).unwrap();
        // each entry divided by 0.99
        let expected = [0.595959595960, 0.202020202020, 0.101010101010, 0.101010101010];
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 5e-13, "{g} vs {e}");
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalizes_counts() {
        let got = normalize_candidate_distribution(&[30.0, 10.0, 5.0, 5.0]).unwrap();
        assert_eq!(got, vec![0.6, 0.2, 0.1, 0.1]);
    }

    #[test]
    fn rejects_distribution_outside_tolerance() {
        assert!(matches!(
            normalize_candidate_distribution(&[0.5, 0.2, 0.1, 0.1]),
            Err(DistributionError::Sum(_))
        ));
        assert_eq!(
            normalize_candidate_distribution(&[0.5, -0.1]),
            Err(DistributionError::InvalidEntry(1))
        );
        assert!(normalize_candidate_distribution(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = QuestionSet::new("s", vec![q4(), q4()]).unwrap_err();
        assert_eq!(err, SetError::DuplicateId("q".into()));
    }

    #[test]
    fn stats_empty_set() {
        let set = QuestionSet::new("s", vec![]).unwrap();
        assert_eq!(corpus_stats(&set), CorpusStats::default());
    }

    #[test]
    fn stats_per_level() {
        let mut qs = Vec::new();
        for i in 0..5 {
            let mut q = q4().with_level(if i < 3 { "B1" } else { "B2" });
            q.id = format!("q{i}");
            q.context = format!("ctx{}", i % 2);
            qs.push(q);
        }
        let set = QuestionSet::new("s", qs).unwrap();
        let stats = corpus_stats(&set);
        assert_eq!(stats.levels["B1"].questions, 3);
        assert_eq!(stats.levels["B2"].questions, 2);
        assert_eq!(stats.levels["B1"].contexts, 2);
        assert_eq!(stats.levels["B2"].contexts, 2);
        assert_eq!(stats.total_questions, 5);
        assert_eq!(set.level_index()["B2"], vec!["q3".to_string(), "q4".to_string()]);
    }
}
