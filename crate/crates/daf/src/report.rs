//! Line-delimited report records and plain-text tables.
//!
//! Every line of a report file is one JSON object with a `kind` field.
//! Raw values are written at full precision; summary records also carry the
//! headline percentages rounded to one decimal place.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use daf_core::corpus::{CorpusStats, QuestionSet};
use daf_core::pipeline::{Aggregates, CorpusReport, PipelineConfig, QuestionReport, Stages, SweepRow};
use daf_core::probing::{ProbeDirective, Quality, RefinedQuestion, SetComparison};
use daf_core::validation::{ChartRow, InterCorrelation, IntraCorrelation, OperatingPoint, Orientation};
use serde::{Deserialize, Serialize};

use crate::error::{DafError, Result};

/// Settings echoed into the summary record. Output paths are left out so
/// that re-running into a different file gives identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub dataset: String,
    pub questions: usize,
    pub tau: f64,
    pub backends: Vec<String>,
    pub equivalence: String,
    pub seed: u64,
    pub context_free: bool,
    pub stages: Stages,
}

impl RunEcho {
    pub fn new(set: &QuestionSet, config: &PipelineConfig) -> Self {
        Self {
            dataset: set.name().into(),
            questions: set.len(),
            tau: config.tau,
            backends: config.backends.clone(),
            equivalence: config.equivalence.clone(),
            seed: config.seed,
            context_free: config.context_free,
            stages: config.stages,
        }
    }
}

/// Headline percentages rendered to one decimal place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rounded {
    pub accuracy: String,
    pub incorrectness_rate: String,
    pub mean_plausibility: String,
    pub mean_diversity: String,
}

pub fn one_decimal(v: f64) -> String {
    format!("{v:.1}")
}

impl Rounded {
    pub fn of(a: &Aggregates) -> Self {
        Self {
            accuracy: one_decimal(a.accuracy),
            incorrectness_rate: one_decimal(a.incorrectness_rate),
            mean_plausibility: one_decimal(a.mean_plausibility),
            mean_diversity: a.mean_diversity.map(one_decimal).unwrap_or_else(|| "-".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub run: RunEcho,
    pub report: CorpusReport,
    pub display: BTreeMap<String, Rounded>,
}

pub const OVERALL: &str = "overall";

impl Summary {
    pub fn new(run: RunEcho, report: CorpusReport) -> Self {
        let mut display = BTreeMap::new();
        display.insert(OVERALL.to_string(), Rounded::of(&report.overall));
        for (level, a) in &report.per_level {
            display.insert(level.clone(), Rounded::of(a));
        }
        Self { run, report, display }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub directive: ProbeDirective,
    pub vanilla_accuracy: f64,
    pub context_free_accuracy: Option<f64>,
    pub parse_failures: usize,
    pub run: RunEcho,
    pub report: CorpusReport,
    pub display: BTreeMap<String, Rounded>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Question(QuestionReport),
    Summary(Summary),
    Sweep(SweepRow),
    Kept {
        id: String,
        answer_index: usize,
        options: Vec<String>,
        rejected: Vec<String>,
    },
    PrPoint {
        orientation: Orientation,
        #[serde(flatten)]
        point: OperatingPoint,
    },
    Best {
        orientation: Orientation,
        #[serde(flatten)]
        point: OperatingPoint,
    },
    Chart(ChartRow),
    IntraCorrelation(IntraCorrelation),
    InterCorrelation(InterCorrelation),
    CorrelationError {
        which: String,
        message: String,
    },
    Refinement(RefinedQuestion),
    ProbeSummary(ProbeRecord),
    Stats(CorpusStats),
    Comparison {
        quality: Quality,
        #[serde(flatten)]
        result: SetComparison,
    },
    Histogram {
        set: String,
        quality: Quality,
        bins: usize,
        counts: Vec<usize>,
    },
}

pub fn write_records<W: Write>(records: &[Record], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Writes the records to `path`, or to stdout when `path` is `None`.
pub fn emit(records: &[Record], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| DafError::io(dir, e))?;
            }
            let f = fs::File::create(p).map_err(|e| DafError::io(p, e))?;
            write_records(records, io::BufWriter::new(f)).map_err(|e| DafError::io(p, e))
        }
        None => write_records(records, io::stdout().lock()).map_err(|e| DafError::io("<stdout>", e)),
    }
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let f = fs::File::open(path).map_err(|e| DafError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| DafError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| DafError::Record {
            path: path.to_path_buf(),
            record: format!("line {}", i + 1),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// The per-question reports in a record list, in file order.
pub fn question_reports(records: &[Record]) -> Vec<QuestionReport> {
    records
        .iter()
        .filter_map(|r| match r {
            Record::Question(q) => Some(q.clone()),
            _ => None,
        })
        .collect()
}

pub fn refinements(records: &[Record]) -> Vec<RefinedQuestion> {
    records
        .iter()
        .filter_map(|r| match r {
            Record::Refinement(q) => Some(q.clone()),
            _ => None,
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(one_decimal).unwrap_or_else(|| "-".into())
}

/// Per-level table of the four headline percentages.
pub fn render_table(report: &CorpusReport) -> String {
    let mut rows: Vec<(String, &Aggregates)> = report
        .per_level
        .iter()
        .map(|(k, v)| (k.clone(), v))
        .collect();
    rows.push((OVERALL.into(), &report.overall));
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(5).max(5);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>9}  {:>8}  {:>13}  {:>12}  {:>9}",
        "level", "questions", "accuracy", "incorrectness", "plausibility", "diversity"
    );
    for (level, a) in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>8}  {:>13}  {:>12}  {:>9}",
            level,
            a.questions,
            cell(Some(a.accuracy)),
            cell(Some(a.incorrectness_rate)),
            cell(Some(a.mean_plausibility)),
            cell(a.mean_diversity),
        );
    }
    if report.failed > 0 {
        let _ = writeln!(s, "failed: {} of {}", report.failed, report.submitted);
    }
    s
}

pub fn render_stats(stats: &CorpusStats) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10}  {:>9}  {:>8}", "level", "questions", "contexts");
    for (level, c) in &stats.levels {
        let _ = writeln!(s, "{:<10}  {:>9}  {:>8}", level, c.questions, c.contexts);
    }
    let _ = writeln!(s, "{:<10}  {:>9}  {:>8}", "total", stats.total_questions, stats.total_contexts);
    s
}
