//! Probing the metrics with an external language model.
//!
//! The model is asked to rewrite a question's distractors to be more or less
//! plausible or diverse. Substituting the rewrites and re-running the
//! pipeline shows whether the metrics move in the requested direction.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Question, QuestionSet};
use crate::metrics::EquivalenceScorer;
use crate::pipeline::{self, CorpusRun, PipelineConfig, PipelineError, QuestionReport};
use crate::scoring::ScorerBackend;

/// Attempts per question before falling back to the original distractors.
pub const DEFAULT_RETRY_BUDGET: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Plausibility,
    Diversity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProbeDirective {
    pub quality: Quality,
    pub direction: Direction,
}

impl ProbeDirective {
    pub const ALL: [ProbeDirective; 4] = [
        ProbeDirective::new(Quality::Plausibility, Direction::Increase),
        ProbeDirective::new(Quality::Plausibility, Direction::Decrease),
        ProbeDirective::new(Quality::Diversity, Direction::Increase),
        ProbeDirective::new(Quality::Diversity, Direction::Decrease),
    ];

    pub const fn new(quality: Quality, direction: Direction) -> Self {
        Self { quality, direction }
    }

    /// Short tag: `plaus+`, `plaus-`, `div+` or `div-`.
    pub fn tag(&self) -> &'static str {
        match (self.quality, self.direction) {
            (Quality::Plausibility, Direction::Increase) => "plaus+",
            (Quality::Plausibility, Direction::Decrease) => "plaus-",
            (Quality::Diversity, Direction::Increase) => "div+",
            (Quality::Diversity, Direction::Decrease) => "div-",
        }
    }

    /// Phrase substituted for `{directive}` in prompt templates.
    pub fn phrase(&self) -> &'static str {
        match (self.quality, self.direction) {
            (Quality::Plausibility, Direction::Increase) => "more plausible",
            (Quality::Plausibility, Direction::Decrease) => "less plausible",
            (Quality::Diversity, Direction::Increase) => "more diverse",
            (Quality::Diversity, Direction::Decrease) => "less diverse",
        }
    }
}

impl fmt::Display for ProbeDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown directive {0:?}, expected plaus+, plaus-, div+ or div-")]
pub struct ParseDirectiveError(pub String);

impl FromStr for ProbeDirective {
    type Err = ParseDirectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProbeDirective::ALL
            .into_iter()
            .find(|d| d.tag() == s)
            .ok_or_else(|| ParseDirectiveError(s.to_owned()))
    }
}

/// Prompt template with `{name}` placeholders.
///
/// Recognised placeholders: `{context}`, `{question}`, `{options}` (lettered
/// list), `{answer}`, `{answer_label}`, `{directive}`, `{k}`. Other text,
/// including unknown braces, is copied verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub text: String,
}

pub const DEFAULT_TEMPLATE: &str = "\
You are helping to write multiple-choice reading comprehension questions.

Context:
{context}

Question:
{question}

Options:
{options}

The correct answer is option {answer_label}: {answer}

Rewrite the {k} distractors (the incorrect options) so that they are {directive}. \
The correct answer stays unchanged and every new distractor must still be incorrect \
given the context.

Reply with exactly {k} replacement distractors as a numbered list, one per line \
(1. ... to {k}. ...), and nothing else.
";

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            text: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

fn option_label(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("{}", i + 1)
    }
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn render(&self, q: &Question, directive: ProbeDirective) -> String {
        let options = q
            .options
            .iter()
            .enumerate()
            .map(|(i, o)| format!("{}) {}", option_label(i), o))
            .collect::<Vec<_>>()
            .join("\n");
        let k = q.distractor_count().to_string();
        let answer_label = option_label(q.answer_index);
        let values: [(&str, &str); 7] = [
            ("context", &q.context),
            ("question", &q.question),
            ("options", &options),
            ("answer", q.answer()),
            ("answer_label", &answer_label),
            ("directive", directive.phrase()),
            ("k", &k),
        ];
        let mut out = String::with_capacity(self.text.len() + q.context.len());
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let replaced = after.find('}').and_then(|close| {
                let name = &after[..close];
                values
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, v)| (*v, close))
            });
            match replaced {
                Some((value, close)) => {
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}

/// Renders the default prompt for `q`.
pub fn build_probe_prompt(q: &Question, directive: ProbeDirective) -> String {
    PromptTemplate::default().render(q, directive)
}

/// Strips a leading `N.`, `N)` or `N:` marker, returning `(N, rest)`.
fn numbered_item(line: &str) -> Option<(usize, &str)> {
    let line = line.trim_start();
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let n: usize = line[..digits].parse().ok()?;
    let rest = &line[digits..];
    let rest = rest
        .strip_prefix('.')
        .or_else(|| rest.strip_prefix(')'))
        .or_else(|| rest.strip_prefix(':'))?;
    Some((n, rest.trim()))
}

/// Extracts the first numbered list `1..` from a response. Blank lines inside
/// the list are allowed; the list ends at the first other line.
pub fn parse_numbered_list(response: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    for line in response.lines() {
        match numbered_item(line) {
            Some((n, text)) if n == items.len() + 1 => items.push(text.to_string()),
            Some(_) if items.is_empty() => {}
            _ if items.is_empty() => {}
            _ if line.trim().is_empty() => {}
            _ => break,
        }
    }
    items
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedQuestion {
    pub original_id: String,
    pub directive: ProbeDirective,
    /// Replacement distractors in order; empty when parsing failed.
    pub distractors: Vec<String>,
    /// Raw model response of the last attempt.
    pub provenance: String,
    pub parse_status: ParseStatus,
    pub attempts: usize,
}

impl RefinedQuestion {
    /// The question with its distractors replaced, the answer kept in place.
    /// Falls back to the original when parsing failed.
    pub fn apply_to(&self, q: &Question) -> Question {
        if self.parse_status != ParseStatus::Ok {
            return q.clone();
        }
        let mut out = q.clone();
        let mut replacements = self.distractors.iter();
        for i in 0..q.options.len() {
            if i != q.answer_index {
                if let Some(d) = replacements.next() {
                    out.options[i] = d.clone();
                }
            }
        }
        out
    }
}

/// Parses one response into exactly `K` non-empty distractors.
pub fn apply_refinement(q: &Question, response: &str, directive: ProbeDirective) -> RefinedQuestion {
    let items = parse_numbered_list(response);
    let ok = items.len() == q.distractor_count() && items.iter().all(|s| !s.is_empty());
    RefinedQuestion {
        original_id: q.id.clone(),
        directive,
        distractors: if ok { items } else { Vec::new() },
        provenance: response.to_string(),
        parse_status: if ok { ParseStatus::Ok } else { ParseStatus::Failed },
        attempts: 1,
    }
}

/// One completion request, carrying enough identity for response caching.
#[derive(Debug, Clone, Copy)]
pub struct ProbeRequest<'a> {
    pub question_id: &'a str,
    pub directive: ProbeDirective,
    /// 0-based retry number.
    pub attempt: usize,
    pub prompt: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("language model request failed: {0}")]
pub struct LlmError(pub String);

pub trait LlmClient {
    fn complete(&self, request: &ProbeRequest<'_>) -> Result<String, LlmError>;
}

/// Replies with the question's own distractors as a numbered list.
#[derive(Debug, Clone, Default)]
pub struct EchoClient {
    questions: BTreeMap<String, Vec<String>>,
}

impl EchoClient {
    pub fn new(set: &QuestionSet) -> Self {
        Self {
            questions: set
                .questions()
                .iter()
                .map(|q| (q.id.clone(), q.distractors().into_iter().map(String::from).collect()))
                .collect(),
        }
    }
}

pub fn numbered(items: &[impl AsRef<str>]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

impl LlmClient for EchoClient {
    fn complete(&self, request: &ProbeRequest<'_>) -> Result<String, LlmError> {
        self.questions
            .get(request.question_id)
            .map(|d| numbered(d))
            .ok_or_else(|| LlmError(format!("unknown question {}", request.question_id)))
    }
}

/// Scripted replies keyed by `(question id, directive)`. Each key holds a
/// sequence consumed by attempt number; the last entry repeats. Unknown keys
/// get an empty reply.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    replies: BTreeMap<(String, ProbeDirective), Vec<Result<String, LlmError>>>,
}

impl ScriptedClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, question_id: &str, directive: ProbeDirective, reply: Result<String, LlmError>) {
        self.replies
            .entry((question_id.to_string(), directive))
            .or_default()
            .push(reply);
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, request: &ProbeRequest<'_>) -> Result<String, LlmError> {
        let key = (request.question_id.to_string(), request.directive);
        match self.replies.get(&key) {
            Some(seq) if !seq.is_empty() => seq[request.attempt.min(seq.len() - 1)].clone(),
            _ => Ok(String::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub directive: ProbeDirective,
    pub corpus: pipeline::CorpusReport,
    /// Questions that kept their original distractors after the retry budget.
    pub parse_failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    pub refinements: Vec<RefinedQuestion>,
    pub refined_set: QuestionSet,
    pub run: CorpusRun,
    pub summary: ProbeSummary,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProbeError {
    /// The client failed outright; refinements gathered so far are kept.
    #[error("probing aborted at question {question_id}: {source}")]
    Client {
        question_id: String,
        source: LlmError,
        partial: Vec<RefinedQuestion>,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Asks `client` for refinements of every question (up to `retry_budget`
/// attempts each), substitutes them and re-runs the pipeline.
pub fn refine_corpus(
    set: &QuestionSet,
    directive: ProbeDirective,
    template: &PromptTemplate,
    client: &dyn LlmClient,
    retry_budget: usize,
) -> Result<Vec<RefinedQuestion>, ProbeError> {
    let mut out = Vec::with_capacity(set.len());
    for q in set {
        let prompt = template.render(q, directive);
        let mut refined = None;
        for attempt in 0..retry_budget.max(1) {
            let request = ProbeRequest {
                question_id: &q.id,
                directive,
                attempt,
                prompt: &prompt,
            };
            let response = match client.complete(&request) {
                Ok(r) => r,
                Err(source) => {
                    return Err(ProbeError::Client {
                        question_id: q.id.clone(),
                        source,
                        partial: out,
                    })
                }
            };
            let mut r = apply_refinement(q, &response, directive);
            r.attempts = attempt + 1;
            let done = r.parse_status == ParseStatus::Ok;
            refined = Some(r);
            if done {
                break;
            }
        }
        if let Some(r) = refined {
            out.push(r);
        }
    }
    Ok(out)
}

/// The set with every successful refinement substituted.
pub fn refined_set(set: &QuestionSet, refinements: &[RefinedQuestion]) -> QuestionSet {
    let by_id: BTreeMap<&str, &RefinedQuestion> =
        refinements.iter().map(|r| (r.original_id.as_str(), r)).collect();
    let questions = set
        .questions()
        .iter()
        .map(|q| match by_id.get(q.id.as_str()) {
            Some(r) => r.apply_to(q),
            None => q.clone(),
        })
        .collect();
    // ids are unchanged, so uniqueness still holds
    QuestionSet::new(set.name(), questions).unwrap_or_else(|_| set.clone())
}

pub fn probe_corpus(
    set: &QuestionSet,
    directive: ProbeDirective,
    template: &PromptTemplate,
    client: &dyn LlmClient,
    config: &PipelineConfig,
    backends: &[&dyn ScorerBackend],
    equivalence: &dyn EquivalenceScorer,
) -> Result<ProbeOutcome, ProbeError> {
    let refinements = refine_corpus(set, directive, template, client, DEFAULT_RETRY_BUDGET)?;
    let refined = refined_set(set, &refinements);
    let run = pipeline::run_corpus(&refined, config, backends, equivalence)?;
    let parse_failures = refinements
        .iter()
        .filter(|r| r.parse_status == ParseStatus::Failed)
        .count();
    Ok(ProbeOutcome {
        summary: ProbeSummary {
            directive,
            corpus: run.summary.clone(),
            parse_failures,
        },
        refinements,
        refined_set: refined,
        run,
    })
}

/// Accuracy (percent) with every passage removed.
pub fn context_free_accuracy(
    set: &QuestionSet,
    config: &PipelineConfig,
    backends: &[&dyn ScorerBackend],
    equivalence: &dyn EquivalenceScorer,
) -> Result<f64, PipelineError> {
    let mut cfg = config.clone();
    cfg.context_free = true;
    cfg.stages.diversity = false;
    cfg.stages.post_filter_diversity = false;
    Ok(pipeline::run_corpus(set, &cfg, backends, equivalence)?
        .summary
        .overall
        .accuracy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetComparison {
    /// Fraction of compared questions where set A scores strictly higher.
    pub fraction: f64,
    pub compared: usize,
    /// Aligned questions skipped because a score was missing or undefined.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no aligned questions to compare")]
pub struct NoAlignedQuestions;

fn quality_of(r: &QuestionReport, quality: Quality) -> Option<f64> {
    match quality {
        Quality::Plausibility => r.plausibility(),
        Quality::Diversity => r.diversity(),
    }
}

/// Question-level comparison of two report sets aligned on id.
pub fn compare_sets(
    a: &[QuestionReport],
    b: &[QuestionReport],
    quality: Quality,
) -> Result<SetComparison, NoAlignedQuestions> {
    let by_id: BTreeMap<&str, &QuestionReport> = b.iter().map(|r| (r.id.as_str(), r)).collect();
    let (mut greater, mut compared, mut skipped) = (0usize, 0usize, 0usize);
    for ra in a {
        let Some(rb) = by_id.get(ra.id.as_str()) else { continue };
        match (quality_of(ra, quality), quality_of(rb, quality)) {
            (Some(x), Some(y)) => {
                compared += 1;
                if x > y {
                    greater += 1;
                }
            }
            _ => skipped += 1,
        }
    }
    if compared == 0 {
        return Err(NoAlignedQuestions);
    }
    Ok(SetComparison {
        fraction: greater as f64 / compared as f64,
        compared,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HistogramError {
    #[error("at least one bin is required")]
    NoBins,
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// Counts over equal-width bins on `[0, 1]`; each bin is right-exclusive
/// except the last, which includes 1.
pub fn score_histogram(values: &[f64], bins: usize) -> Result<Vec<usize>, HistogramError> {
    if bins == 0 {
        return Err(HistogramError::NoBins);
    }
    let mut counts = alloc::vec![0usize; bins];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(HistogramError::OutOfRange(v));
        }
        let i = ((v * bins as f64) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TokenOverlapScorer;
    use crate::scoring::StubBackend;
    use alloc::vec;

    fn q() -> Question {
        let opts = ["in the park", "at school", "at home", "on a bus"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        Question::new("q1", "Tom walked to school.", "Where did Tom go?", opts, 1)
    }

    const PLUS: ProbeDirective = ProbeDirective::new(Quality::Plausibility, Direction::Increase);

    #[test]
    fn directive_tags_round_trip() {
        for d in ProbeDirective::ALL {
            assert_eq!(d.tag().parse::<ProbeDirective>().unwrap(), d);
        }
        assert!("plaus".parse::<ProbeDirective>().is_err());
    }

    #[test]
    fn prompt_structure() {
        let p = build_probe_prompt(&q(), PLUS);
        for o in &q().options {
            assert!(p.contains(o.as_str()));
        }
        assert!(p.contains("Tom walked to school."));
        assert!(p.contains("The correct answer is option B: at school"));
        assert!(p.contains("exactly 3 replacement distractors"));
        assert!(p.contains("more plausible"));
    }

    #[test]
    fn prompts_differ_only_in_directive() {
        let minus = ProbeDirective::new(Quality::Diversity, Direction::Decrease);
        let a = build_probe_prompt(&q(), PLUS);
        let b = build_probe_prompt(&q(), minus);
        assert_ne!(a, b);
        assert_eq!(a.replace("more plausible", "X"), b.replace("less diverse", "X"));
    }

    #[test]
    fn custom_template_substitution() {
        let t = PromptTemplate::new("[{question}] {k} {directive} {unknown} {answer_label}={answer} {");
        assert_eq!(
            t.render(&q(), PLUS),
            "[Where did Tom go?] 3 more plausible {unknown} B=at school {"
        );
    }

    #[test]
    fn parse_exact_list() {
        let r = apply_refinement(&q(), "1. foo\n2. bar\n3. baz", PLUS);
        assert_eq!(r.parse_status, ParseStatus::Ok);
        assert_eq!(r.distractors, vec!["foo", "bar", "baz"]);
        let applied = r.apply_to(&q());
        assert_eq!(applied.options, vec!["foo", "at school", "bar", "baz"]);
        assert_eq!(applied.answer_index, 1);
    }

    #[test]
    fn parse_too_few_items_fails() {
        let r = apply_refinement(&q(), "1. foo\n2. bar", PLUS);
        assert_eq!(r.parse_status, ParseStatus::Failed);
        assert_eq!(r.apply_to(&q()), q());
    }

    #[test]
    fn parse_ignores_preamble_and_commentary() {
        let response = "Here are the new distractors:\n\n1) in the library\n2: at the zoo\n\n3. in a shop\n\nThese are harder because they are all places.\n4. stray";
        let r = apply_refinement(&q(), response, PLUS);
        assert_eq!(r.parse_status, ParseStatus::Ok);
        assert_eq!(r.distractors, vec!["in the library", "at the zoo", "in a shop"]);
    }

    #[test]
    fn parse_rejects_empty_item() {
        let r = apply_refinement(&q(), "1. a\n2.\n3. c", PLUS);
        assert_eq!(r.parse_status, ParseStatus::Failed);
    }

    fn fixture() -> (QuestionSet, StubBackend) {
        let set = QuestionSet::new("s", vec![q()]).unwrap();
        let b = StubBackend::new("s", 0.0).with_row("q1", &[0.0, 2.0, -1.0, -1.0]);
        (set, b)
    }

    fn config() -> PipelineConfig {
        PipelineConfig {
            backends: vec!["stub".into()],
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn echo_probe_matches_vanilla() {
        let (set, b) = fixture();
        let vanilla = pipeline::run_corpus(&set, &config(), &[&b], &TokenOverlapScorer).unwrap();
        let out = probe_corpus(
            &set,
            PLUS,
            &PromptTemplate::default(),
            &EchoClient::new(&set),
            &config(),
            &[&b],
            &TokenOverlapScorer,
        )
        .unwrap();
        assert_eq!(out.summary.corpus, vanilla.summary);
        assert_eq!(out.summary.parse_failures, 0);
    }

    #[test]
    fn retries_then_falls_back() {
        let (set, b) = fixture();
        let mut client = ScriptedClient::new();
        client.push("q1", PLUS, Ok("nothing useful".into()));
        client.push("q1", PLUS, Ok("1. x\n2. y\n3. z".into()));
        let r = refine_corpus(&set, PLUS, &PromptTemplate::default(), &client, 3).unwrap();
        assert_eq!(r[0].attempts, 2);
        assert_eq!(r[0].parse_status, ParseStatus::Ok);

        let mut bad = ScriptedClient::new();
        bad.push("q1", PLUS, Ok("1. only one".into()));
        let out = probe_corpus(&set, PLUS, &PromptTemplate::default(), &bad, &config(), &[&b], &TokenOverlapScorer)
            .unwrap();
        assert_eq!(out.summary.parse_failures, 1);
        assert_eq!(out.refinements[0].attempts, 3);
        assert_eq!(out.refined_set.questions()[0], q());
    }

    #[test]
    fn client_failure_aborts_with_partial() {
        let mut qs = vec![q()];
        let mut second = q();
        second.id = "q2".into();
        qs.push(second);
        let set = QuestionSet::new("s", qs).unwrap();
        let mut client = ScriptedClient::new();
        client.push("q1", PLUS, Ok("1. a\n2. b\n3. c".into()));
        client.push("q2", PLUS, Err(LlmError("quota".into())));
        match refine_corpus(&set, PLUS, &PromptTemplate::default(), &client, 3) {
            Err(ProbeError::Client { question_id, partial, .. }) => {
                assert_eq!(question_id, "q2");
                assert_eq!(partial.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn context_free_accuracy_with_context_blind_stub() {
        let (set, b) = fixture();
        let acc = pipeline::run_corpus(&set, &config(), &[&b], &TokenOverlapScorer)
            .unwrap()
            .summary
            .overall
            .accuracy;
        assert_eq!(context_free_accuracy(&set, &config(), &[&b], &TokenOverlapScorer).unwrap(), acc);

        let mut keyed = b.clone();
        keyed.set_context_free_row("q1", &[3.0, 0.0, 0.0, 0.0]);
        assert_eq!(context_free_accuracy(&set, &config(), &[&keyed], &TokenOverlapScorer).unwrap(), 0.0);
    }

    #[test]
    fn histogram_cases() {
        assert_eq!(score_histogram(&[0.0, 0.999], 2).unwrap(), vec![1, 1]);
        assert_eq!(score_histogram(&[], 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(score_histogram(&[1.0, 0.5], 2).unwrap(), vec![0, 2]);
        assert_eq!(score_histogram(&[1.5], 2), Err(HistogramError::OutOfRange(1.5)));
        assert_eq!(score_histogram(&[0.5], 0), Err(HistogramError::NoBins));
    }
}
