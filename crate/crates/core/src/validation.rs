//! Checks on the metrics themselves: precision/recall of the correctness
//! detector, cumulative operating charts, and rank correlation of system
//! plausibility with human candidate choices.
//!
//! Precision and recall default to treating *incorrect* (a distractor) as the
//! positive class: an option is predicted incorrect when `p_c < threshold`.
//! The opposite orientation, with the answer as positive and `p_c >=
//! threshold` predicting correct, is available through [`Orientation`].

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Question, QuestionSet};
use crate::math;
use crate::metrics;
use crate::pipeline::QuestionReport;
use crate::scoring::{self, ConfidenceDistribution, ScorerBackend, ScoringError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("detector analysis needs at least one distractor and one answer")]
    SingleClass,
    #[error("score {0} is not a number")]
    NaN(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least two values are required, got {0}")]
    TooShort(usize),
    #[error("no eligible questions")]
    NoEligibleQuestions,
    #[error("fewer than 2 eligible questions: {0}")]
    TooFewQuestions(usize),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionLabel {
    Distractor,
    Answer,
}

/// An option's binary-head score and its ground-truth role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredOption {
    pub score: f64,
    pub label: OptionLabel,
}

/// All option scores in `reports`, labelled by each question's answer index.
pub fn scored_options(reports: &[QuestionReport]) -> Vec<ScoredOption> {
    reports
        .iter()
        .filter_map(|r| r.scores.as_ref().map(|s| (r.answer_index, s)))
        .flat_map(|(answer, s)| {
            s.options.iter().map(move |o| ScoredOption {
                score: o.p_c,
                label: if o.index == answer {
                    OptionLabel::Answer
                } else {
                    OptionLabel::Distractor
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Distractors are positive; `p_c < t` predicts incorrect.
    #[default]
    IncorrectPositive,
    /// Answers are positive; `p_c >= t` predicts correct.
    CorrectPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl OperatingPoint {
    /// Precision is 0 when nothing is predicted positive.
    pub fn from_counts(threshold: f64, tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            threshold,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub orientation: Orientation,
    /// One point per threshold, thresholds ascending.
    pub points: Vec<OperatingPoint>,
    /// Highest F1; the lowest threshold wins ties.
    pub best: OperatingPoint,
}

fn check_scores(items: &[ScoredOption]) -> Result<(usize, usize), ValidationError> {
    if let Some(i) = items.iter().find(|i| i.score.is_nan()) {
        return Err(ValidationError::NaN(i.score));
    }
    let distractors = items
        .iter()
        .filter(|i| i.label == OptionLabel::Distractor)
        .count();
    let answers = items.len() - distractors;
    if distractors == 0 || answers == 0 {
        return Err(ValidationError::SingleClass);
    }
    Ok((distractors, answers))
}

/// Thresholds evaluated by [`pr_curve`]: 0, every distinct score, and the
/// smallest value above the largest score, ascending and deduplicated.
pub fn curve_thresholds(items: &[ScoredOption]) -> Vec<f64> {
    let mut ts: Vec<f64> = items.iter().map(|i| i.score).collect();
    let max = ts.iter().copied().fold(0.0f64, f64::max);
    ts.push(0.0);
    ts.push(max.next_up());
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Precision/recall at every threshold in [`curve_thresholds`].
pub fn pr_curve(items: &[ScoredOption], orientation: Orientation) -> Result<PrCurve, ValidationError> {
    let (distractors, answers) = check_scores(items)?;
    let mut sorted: Vec<ScoredOption> = items.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));

    let mut points = Vec::new();
    let mut cursor = 0;
    // items with score strictly below the current threshold
    let (mut d_below, mut a_below) = (0usize, 0usize);
    for t in curve_thresholds(items) {
        while cursor < sorted.len() && sorted[cursor].score < t {
            match sorted[cursor].label {
                OptionLabel::Distractor => d_below += 1,
                OptionLabel::Answer => a_below += 1,
            }
            cursor += 1;
        }
        let point = match orientation {
            Orientation::IncorrectPositive => {
                OperatingPoint::from_counts(t, d_below, a_below, distractors - d_below)
            }
            Orientation::CorrectPositive => OperatingPoint::from_counts(
                t,
                answers - a_below,
                distractors - d_below,
                a_below,
            ),
        };
        points.push(point);
    }
    let mut best = points[0];
    for p in &points[1..] {
        if p.f1 > best.f1 {
            best = *p;
        }
    }
    Ok(PrCurve {
        orientation,
        points,
        best,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartRow {
    pub threshold: f64,
    /// Fraction of distractors with `p_c < threshold`.
    pub distractor: f64,
    /// Fraction of answers with `p_c < threshold`.
    pub answer: f64,
}

/// Cumulative fraction of each label captured below each threshold. A label
/// with no items reports 0.
pub fn operating_chart(items: &[ScoredOption], grid: &[f64]) -> Vec<ChartRow> {
    let count = |label: OptionLabel, t: Option<f64>| {
        items
            .iter()
            .filter(|i| i.label == label && t.is_none_or(|t| i.score < t))
            .count()
    };
    let nd = count(OptionLabel::Distractor, None);
    let na = count(OptionLabel::Answer, None);
    let frac = |c: usize, n: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    grid.iter()
        .map(|&t| ChartRow {
            threshold: t,
            distractor: frac(count(OptionLabel::Distractor, Some(t)), nd),
            answer: frac(count(OptionLabel::Answer, Some(t)), na),
        })
        .collect()
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with fractional ranks for ties. `Ok(None)`
/// when either input has zero rank variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>, ValidationError> {
    if x.len() != y.len() {
        return Err(ValidationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(ValidationError::TooShort(x.len()));
    }
    if let Some(v) = x.iter().chain(y).find(|v| v.is_nan()) {
        return Err(ValidationError::NaN(*v));
    }
    Ok(pearson(&fractional_ranks(x), &fractional_ranks(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionCorrelation {
    pub id: String,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraCorrelation {
    /// Mean of the defined per-question coefficients.
    pub mean_rho: f64,
    pub per_question: Vec<QuestionCorrelation>,
    pub used: usize,
    /// Eligible questions whose coefficient is undefined.
    pub undefined: usize,
    /// Questions lacking a candidate distribution or two distractors.
    pub skipped: usize,
}

fn intra_eligible(q: &Question) -> bool {
    q.candidate_distribution.is_some() && q.distractor_count() >= 2
}

fn intra_from<'a, I>(pairs: I) -> Result<IntraCorrelation, ValidationError>
where
    I: IntoIterator<Item = (&'a Question, Option<&'a ConfidenceDistribution>)>,
{
    let mut per_question = Vec::new();
    let mut skipped = 0;
    for (q, dist) in pairs {
        let (Some(dist), Some(human)) = (dist, q.candidate_distribution.as_ref()) else {
            skipped += 1;
            continue;
        };
        if !intra_eligible(q) {
            skipped += 1;
            continue;
        }
        let system: Vec<f64> = q.distractor_indices().map(|i| dist.probs[i]).collect();
        let people: Vec<f64> = q.distractor_indices().map(|i| human[i]).collect();
        per_question.push(QuestionCorrelation {
            id: q.id.clone(),
            rho: spearman(&system, &people)?,
        });
    }
    let defined: Vec<f64> = per_question.iter().filter_map(|c| c.rho).collect();
    if defined.is_empty() {
        return Err(ValidationError::NoEligibleQuestions);
    }
    Ok(IntraCorrelation {
        mean_rho: defined.iter().sum::<f64>() / defined.len() as f64,
        used: defined.len(),
        undefined: per_question.len() - defined.len(),
        per_question,
        skipped,
    })
}

/// Mean over questions of the rank correlation between system and human
/// confidence in each distractor.
pub fn intra_question_correlation(
    set: &QuestionSet,
    backends: &[&dyn ScorerBackend],
) -> Result<IntraCorrelation, ValidationError> {
    let mut dists = Vec::with_capacity(set.len());
    for q in set {
        dists.push(if intra_eligible(q) {
            Some(scoring::ensemble_confidences(backends, q)?)
        } else {
            None
        });
    }
    intra_from(set.questions().iter().zip(dists.iter().map(Option::as_ref)))
}

/// [`intra_question_correlation`] using confidences already held in reports,
/// matched to questions by id.
pub fn intra_question_correlation_from_reports(
    set: &QuestionSet,
    reports: &[QuestionReport],
) -> Result<IntraCorrelation, ValidationError> {
    let by_id = index_reports(reports);
    intra_from(set.questions().iter().map(|q| {
        let dist = by_id
            .get(q.id.as_str())
            .and_then(|r| r.scores.as_ref())
            .map(|s| &s.confidences);
        (q, dist)
    }))
}

fn index_reports(reports: &[QuestionReport]) -> alloc::collections::BTreeMap<&str, &QuestionReport> {
    reports.iter().map(|r| (r.id.as_str(), r)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterCorrelation {
    /// `None` when either plausibility list has zero rank variance.
    pub rho: Option<f64>,
    pub questions: usize,
}

fn inter_from(pairs: &[(f64, f64)]) -> Result<InterCorrelation, ValidationError> {
    if pairs.len() < 2 {
        return Err(ValidationError::TooFewQuestions(pairs.len()));
    }
    let (system, people): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    Ok(InterCorrelation {
        rho: spearman(&system, &people)?,
        questions: pairs.len(),
    })
}

/// Rank correlation across questions between system plausibility and the
/// fraction of candidates choosing a distractor.
pub fn inter_question_correlation(
    set: &QuestionSet,
    backends: &[&dyn ScorerBackend],
) -> Result<InterCorrelation, ValidationError> {
    let mut pairs = Vec::new();
    for q in set {
        if let Ok(human) = metrics::candidate_plausibility(q) {
            let dist = scoring::ensemble_confidences(backends, q)?;
            pairs.push((metrics::plausibility(&dist), human));
        }
    }
    inter_from(&pairs)
}

pub fn inter_question_correlation_from_reports(
    set: &QuestionSet,
    reports: &[QuestionReport],
) -> Result<InterCorrelation, ValidationError> {
    let by_id = index_reports(reports);
    let pairs: Vec<(f64, f64)> = set
        .questions()
        .iter()
        .filter_map(|q| {
            let human = metrics::candidate_plausibility(q).ok()?;
            let system = by_id.get(q.id.as_str())?.plausibility()?;
            Some((system, human))
        })
        .collect();
    inter_from(&pairs)
}
