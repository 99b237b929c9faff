//! Distractor filtration pipeline: incorrectness filter, then plausibility,
//! then diversity, per question; aggregated into corpus-level figures.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Question, QuestionSet, UNTAGGED_LEVEL};
use crate::metrics::{self, DiversityScore, EquivalenceScorer, Verdict};
use crate::scoring::{self, ConfidenceDistribution, ScorerBackend};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("question set is empty")]
    EmptySet,
    #[error("all {0} questions failed")]
    AllFailed(usize),
    #[error("tau grid is empty")]
    EmptyGrid,
    #[error("tau {0} outside [0, 1]")]
    TauOutOfRange(f64),
}

/// Optional pipeline stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stages {
    /// Diversity of the distractors as supplied.
    pub diversity: bool,
    /// Diversity of the distractors that survive the incorrectness filter.
    pub post_filter_diversity: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            diversity: true,
            post_filter_diversity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub tau: f64,
    pub backends: Vec<String>,
    pub equivalence: String,
    pub out: Option<String>,
    pub seed: u64,
    pub context_free: bool,
    pub stages: Stages,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tau: metrics::TAU_RACE,
            backends: Vec::new(),
            equivalence: "overlap".into(),
            out: None,
            seed: 0,
            context_free: false,
            stages: Stages::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(PipelineError::Config(alloc::format!(
                "tau {} outside [0, 1]",
                self.tau
            )));
        }
        if self.backends.is_empty() {
            return Err(PipelineError::Config("at least one backend is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionVerdict {
    pub index: usize,
    pub p_c: f64,
    pub label: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScores {
    /// Binary-head probability and label for every option, answer included.
    pub options: Vec<OptionVerdict>,
    /// Distractors passing the incorrectness filter.
    pub kept: Vec<usize>,
    /// Distractors the binary head considers possibly correct.
    pub rejected: Vec<usize>,
    pub confidences: ConfidenceDistribution,
    pub plausibility: f64,
    /// Plausibility from the first backend alone.
    pub plausibility_single: f64,
    pub diversity: Option<DiversityScore>,
    pub diversity_post_filter: Option<f64>,
    pub predicted: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub id: String,
    pub level: Option<String>,
    pub answer_index: usize,
    /// Cause of failure; `scores` is absent when set.
    pub failure: Option<String>,
    pub scores: Option<QuestionScores>,
}

impl QuestionReport {
    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn plausibility(&self) -> Option<f64> {
        self.scores.as_ref().map(|s| s.plausibility)
    }

    pub fn diversity(&self) -> Option<f64> {
        self.scores
            .as_ref()
            .and_then(|s| s.diversity.as_ref())
            .and_then(|d| d.value)
    }

    /// `p_c` of each distractor, in option order.
    pub fn distractor_p_c(&self) -> impl Iterator<Item = f64> + '_ {
        let answer = self.answer_index;
        self.scores
            .iter()
            .flat_map(|s| s.options.iter())
            .filter(move |o| o.index != answer)
            .map(|o| o.p_c)
    }

    fn failed(q: &Question, cause: String) -> Self {
        Self {
            id: q.id.clone(),
            level: q.level.clone(),
            answer_index: q.answer_index,
            failure: Some(cause),
            scores: None,
        }
    }
}

fn score(
    q: &Question,
    config: &PipelineConfig,
    backends: &[&dyn ScorerBackend],
    equivalence: &dyn EquivalenceScorer,
) -> Result<QuestionScores, String> {
    let heads = scoring::score_question(backends, q).map_err(|e| e.to_string())?;

    let options: Vec<OptionVerdict> = heads
        .correctness
        .iter()
        .enumerate()
        .map(|(index, &p_c)| OptionVerdict {
            index,
            p_c,
            label: metrics::verdict(p_c, config.tau),
        })
        .collect();
    let (kept, rejected): (Vec<usize>, Vec<usize>) = q
        .distractor_indices()
        .partition(|&i| options[i].label == Verdict::Incorrect);

    let plausibility = metrics::plausibility(&heads.confidences);
    let plausibility_single = metrics::plausibility(&heads.single);

    let diversity = if config.stages.diversity {
        let ds = q.distractors();
        Some(metrics::diversity(equivalence, &ds, &q.question).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let diversity_post_filter = if config.stages.post_filter_diversity {
        let ds: Vec<&str> = kept.iter().map(|&i| q.options[i].as_str()).collect();
        metrics::diversity(equivalence, &ds, &q.question)
            .map_err(|e| e.to_string())?
            .value
    } else {
        None
    };

    let predicted = scoring::predict_answer(&heads.confidences);
    Ok(QuestionScores {
        options,
        kept,
        rejected,
        confidences: heads.confidences,
        plausibility,
        plausibility_single,
        diversity,
        diversity_post_filter,
        predicted,
        correct: predicted == q.answer_index,
    })
}

/// Scores one question. Backend or scorer failures produce a failed report
/// rather than an error.
pub fn evaluate_question(
    q: &Question,
    config: &PipelineConfig,
    backends: &[&dyn ScorerBackend],
    equivalence: &dyn EquivalenceScorer,
) -> QuestionReport {
    let result = if config.context_free && !q.context.is_empty() {
        let mut blind = q.clone();
        blind.context.clear();
        score(&blind, config, backends, equivalence)
    } else {
        score(q, config, backends, equivalence)
    };
    match result {
        Ok(scores) => QuestionReport {
            id: q.id.clone(),
            level: q.level.clone(),
            answer_index: q.answer_index,
            failure: None,
            scores: Some(scores),
        },
        Err(cause) => QuestionReport::failed(q, cause),
    }
}

/// Corpus- or level-wide figures. All rates and means are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub questions: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub distractors: usize,
    pub incorrect: usize,
    pub incorrectness_rate: f64,
    pub incorrectness_rate_per_question: f64,
    pub mean_plausibility: f64,
    pub mean_plausibility_single: f64,
    pub diversity_defined: usize,
    pub mean_diversity: Option<f64>,
    pub mean_diversity_post_filter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    /// Questions submitted, including failed ones.
    pub submitted: usize,
    pub failed: usize,
    pub overall: Aggregates,
    pub per_level: BTreeMap<String, Aggregates>,
}

#[derive(Default)]
struct Tally {
    questions: usize,
    correct: usize,
    distractors: usize,
    incorrect: usize,
    per_question_rate_sum: f64,
    per_question_rate_n: usize,
    plausibility_sum: f64,
    plausibility_single_sum: f64,
    diversity_sum: f64,
    diversity_n: usize,
    post_filter_sum: f64,
    post_filter_n: usize,
}

impl Tally {
    fn add(&mut self, report: &QuestionReport) {
        let Some(s) = &report.scores else { return };
        self.questions += 1;
        self.correct += usize::from(s.correct);
        let k = s.kept.len() + s.rejected.len();
        self.distractors += k;
        self.incorrect += s.kept.len();
        if k > 0 {
            self.per_question_rate_sum += metrics::percentage(s.kept.len(), k);
            self.per_question_rate_n += 1;
        }
        self.plausibility_sum += s.plausibility;
        self.plausibility_single_sum += s.plausibility_single;
        if let Some(v) = s.diversity.as_ref().and_then(|d| d.value) {
            self.diversity_sum += v;
            self.diversity_n += 1;
        }
        if let Some(v) = s.diversity_post_filter {
            self.post_filter_sum += v;
            self.post_filter_n += 1;
        }
    }

    fn finish(&self) -> Aggregates {
        let mean = |sum: f64, n: usize| (n > 0).then(|| 100.0 * sum / n as f64);
        let pct = |c: usize, n: usize| if n > 0 { metrics::percentage(c, n) } else { 0.0 };
        Aggregates {
            questions: self.questions,
            correct: self.correct,
            accuracy: pct(self.correct, self.questions),
            distractors: self.distractors,
            incorrect: self.incorrect,
            incorrectness_rate: pct(self.incorrect, self.distractors),
            incorrectness_rate_per_question: if self.per_question_rate_n > 0 {
                self.per_question_rate_sum / self.per_question_rate_n as f64
            } else {
                0.0
            },
            mean_plausibility: mean(self.plausibility_sum, self.questions).unwrap_or(0.0),
            mean_plausibility_single: mean(self.plausibility_single_sum, self.questions)
                .unwrap_or(0.0),
            diversity_defined: self.diversity_n,
            mean_diversity: mean(self.diversity_sum, self.diversity_n),
            mean_diversity_post_filter: mean(self.post_filter_sum, self.post_filter_n),
        }
    }
}

pub fn level_key(level: Option<&str>) -> &str {
    level.unwrap_or(UNTAGGED_LEVEL)
}

/// Aggregates per-question reports. Sums are taken in report order, so the
/// result does not depend on how the reports were produced.
pub fn summarize(reports: &[QuestionReport]) -> CorpusReport {
    let mut overall = Tally::default();
    let mut levels: BTreeMap<String, Tally> = BTreeMap::new();
    for r in reports {
        overall.add(r);
        if r.scores.is_some() {
            levels
                .entry(level_key(r.level.as_deref()).to_string())
                .or_default()
                .add(r);
        }
    }
    CorpusReport {
        submitted: reports.len(),
        failed: reports.iter().filter(|r| r.is_failed()).count(),
        overall: overall.finish(),
        per_level: levels.into_iter().map(|(k, t)| (k, t.finish())).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRun {
    pub reports: Vec<QuestionReport>,
    pub summary: CorpusReport,
}

/// Errors for an empty set, or when no question could be scored.
pub fn finish_run(reports: Vec<QuestionReport>) -> Result<CorpusRun, PipelineError> {
    if reports.is_empty() {
        return Err(PipelineError::EmptySet);
    }
    if reports.iter().all(|r| r.is_failed()) {
        return Err(PipelineError::AllFailed(reports.len()));
    }
    let summary = summarize(&reports);
    Ok(CorpusRun { reports, summary })
}

/// Evaluates every question in order and aggregates the results.
pub fn run_corpus(
    set: &QuestionSet,
    config: &PipelineConfig,
    backends: &[&dyn ScorerBackend],
    equivalence: &dyn EquivalenceScorer,
) -> Result<CorpusRun, PipelineError> {
    config.validate()?;
    if set.is_empty() {
        return Err(PipelineError::EmptySet);
    }
    let reports = set
        .questions()
        .iter()
        .map(|q| evaluate_question(q, config, backends, equivalence))
        .collect();
    finish_run(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub incorrectness_rate: f64,
    /// Distractors with `p_c < tau`.
    pub kept: usize,
}

/// Re-applies the incorrectness filter at each grid threshold using the
/// `p_c` values already stored in `reports`.
pub fn sweep_tau(reports: &[QuestionReport], grid: &[f64]) -> Result<Vec<SweepRow>, PipelineError> {
    if grid.is_empty() {
        return Err(PipelineError::EmptyGrid);
    }
    if let Some(t) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(PipelineError::TauOutOfRange(*t));
    }
    let scores: Vec<f64> = reports.iter().flat_map(|r| r.distractor_p_c()).collect();
    if scores.is_empty() {
        return Err(PipelineError::EmptySet);
    }
    Ok(grid
        .iter()
        .map(|&tau| {
            let kept = scores.iter().filter(|&&p| p < tau).count();
            SweepRow {
                tau,
                incorrectness_rate: metrics::percentage(kept, scores.len()),
                kept,
            }
        })
        .collect())
}

/// `n + 1` evenly spaced thresholds from 0 to 1 inclusive.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// The question restricted to its answer and kept distractors, or `None`
/// when the report failed.
pub fn filtered_question(q: &Question, report: &QuestionReport) -> Option<Question> {
    let scores = report.scores.as_ref()?;
    let mut out = q.clone();
    let keep: Vec<usize> = (0..q.options.len())
        .filter(|i| *i == q.answer_index || scores.kept.contains(i))
        .collect();
    out.options = keep.iter().map(|&i| q.options[i].clone()).collect();
    out.answer_index = keep.iter().position(|&i| i == q.answer_index)?;
    // the surviving shares are renormalised so the row still loads; a row with
    // no surviving mass has nothing left to say
    out.candidate_distribution = q.candidate_distribution.as_ref().and_then(|d| {
        let part: Vec<f64> = keep.iter().map(|&i| d[i]).collect();
        let sum: f64 = part.iter().sum();
        (sum > 0.0).then(|| part.iter().map(|v| v / sum).collect())
    });
    Some(out)
}
