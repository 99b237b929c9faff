//! Dataset readers and the native JSONL writer.
//!
//! Three layouts are understood:
//!
//! * **native**: one JSON object per line with the fields of
//!   [`Question`]. `id` may be omitted, in which case the 1-based line number
//!   is used.
//! * **race**: a split directory containing `middle/`, `high/` and
//!   optionally `college/`, each holding one JSON file per passage with
//!   `article`, `questions`, `options` and letter `answers`. Levels become
//!   `RACE-M`, `RACE-H` and `RACE-C`.
//! * **cmcqrd**: a JSON array or JSON lines of question records with a
//!   candidate distribution. Field names are matched loosely (see
//!   [`CmcqrdRecord`]); the distribution may be given as fractions or counts.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use daf_core::corpus::{normalize_candidate_distribution, validate_question, Question, QuestionSet};
use serde::Deserialize;

use crate::error::{DafError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    #[default]
    NativeJsonl,
    RaceStyle,
    CmcqrdStyle,
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "native" | "native-jsonl" | "jsonl" => Ok(DataFormat::NativeJsonl),
            "race" | "race-style" => Ok(DataFormat::RaceStyle),
            "cmcqrd" | "cmcqrd-style" => Ok(DataFormat::CmcqrdStyle),
            other => Err(format!(
                "unknown format {other:?}, expected native-jsonl, race-style or cmcqrd-style"
            )),
        }
    }
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<QuestionSet> {
    match format {
        DataFormat::NativeJsonl => load_native(path),
        DataFormat::RaceStyle => load_race(path),
        DataFormat::CmcqrdStyle => load_cmcqrd(path),
    }
}

fn set_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn record_error(path: &Path, record: impl Into<String>, message: impl Into<String>) -> DafError {
    DafError::Record {
        path: path.to_path_buf(),
        record: record.into(),
        message: message.into(),
    }
}

/// Renormalises the candidate distribution and enforces the question
/// invariants. Duplicate options are allowed through.
fn finish_question(path: &Path, record: &str, mut q: Question) -> Result<Question> {
    if let Some(raw) = q.candidate_distribution.take() {
        let norm = normalize_candidate_distribution(&raw)
            .map_err(|e| record_error(path, record, e.to_string()))?;
        q.candidate_distribution = Some(norm);
    }
    if let Some(v) = validate_question(&q).into_iter().find(|v| v.is_fatal()) {
        return Err(record_error(path, record, v.to_string()));
    }
    Ok(q)
}

#[derive(Deserialize)]
struct NativeRecord {
    id: Option<String>,
    context: String,
    question: String,
    options: Vec<String>,
    answer_index: usize,
    #[serde(default)]
    level: Option<String>,
    #[serde(default)]
    candidate_distribution: Option<Vec<f64>>,
}

pub fn load_native(path: &Path) -> Result<QuestionSet> {
    let file = fs::File::open(path).map_err(|e| DafError::io(path, e))?;
    let mut questions = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DafError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = (i + 1).to_string();
        let rec: NativeRecord = serde_json::from_str(&line)
            .map_err(|e| record_error(path, format!("line {line_no}"), e.to_string()))?;
        let id = rec.id.unwrap_or_else(|| line_no.clone());
        let label = format!("line {line_no} (id {id})");
        let q = Question {
            id,
            context: rec.context,
            question: rec.question,
            options: rec.options,
            answer_index: rec.answer_index,
            level: rec.level,
            candidate_distribution: rec.candidate_distribution,
        };
        questions.push(finish_question(path, &label, q)?);
    }
    Ok(QuestionSet::new(set_name(path), questions)?)
}

/// Writes one JSON object per question, in set order.
pub fn write_native<W: Write>(set: &QuestionSet, mut out: W) -> std::io::Result<()> {
    for q in set {
        serde_json::to_writer(&mut out, q)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_native(set: &QuestionSet, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| DafError::io(path, e))?;
    write_native(set, std::io::BufWriter::new(file)).map_err(|e| DafError::io(path, e))
}

/// RACE level directories and the tags assigned to them.
pub const RACE_LEVELS: [(&str, &str); 3] = [
    ("middle", "RACE-M"),
    ("high", "RACE-H"),
    ("college", "RACE-C"),
];

#[derive(Deserialize)]
struct RacePassage {
    #[serde(default)]
    id: Option<String>,
    article: String,
    questions: Vec<String>,
    options: Vec<Vec<String>>,
    answers: Vec<String>,
}

fn letter_index(s: &str) -> Option<usize> {
    let s = s.trim();
    let mut chars = s.chars();
    let c = chars.next()?;
    if chars.next().is_some() || !c.is_ascii_alphabetic() {
        return None;
    }
    Some((c.to_ascii_uppercase() as u8 - b'A') as usize)
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| DafError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| !n.starts_with('.'))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn load_race_dir(dir: &Path, level: Option<&str>, prefix: &str, out: &mut Vec<Question>) -> Result<()> {
    for file in sorted_files(dir)? {
        let text = fs::read_to_string(&file).map_err(|e| DafError::io(&file, e))?;
        let stem = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let passage: RacePassage = serde_json::from_str(&text)
            .map_err(|e| record_error(&file, stem.clone(), e.to_string()))?;
        let n = passage.questions.len();
        if passage.options.len() != n || passage.answers.len() != n {
            return Err(record_error(
                &file,
                stem,
                "questions, options and answers differ in length",
            ));
        }
        let base = passage
            .id
            .as_deref()
            .map(|id| id.trim_end_matches(".txt").to_string())
            .unwrap_or(stem);
        for (i, ((question, options), answer)) in passage
            .questions
            .into_iter()
            .zip(passage.options)
            .zip(passage.answers)
            .enumerate()
        {
            let id = format!("{prefix}{base}-{i}");
            let answer_index = letter_index(&answer)
                .ok_or_else(|| record_error(&file, id.clone(), format!("bad answer {answer:?}")))?;
            let mut q = Question::new(id.clone(), passage.article.clone(), question, options, answer_index);
            q.level = level.map(String::from);
            out.push(finish_question(&file, &id, q)?);
        }
    }
    Ok(())
}

/// Loads one RACE split directory (e.g. `RACE/train`).
pub fn load_race(path: &Path) -> Result<QuestionSet> {
    let mut questions = Vec::new();
    let mut found = false;
    for (dir, tag) in RACE_LEVELS {
        let sub = path.join(dir);
        if sub.is_dir() {
            found = true;
            load_race_dir(&sub, Some(tag), &format!("{dir}/"), &mut questions)?;
        }
    }
    if !found {
        if !path.is_dir() {
            return Err(DafError::Format {
                path: path.to_path_buf(),
                message: "RACE-style data must be a directory".into(),
            });
        }
        load_race_dir(path, None, "", &mut questions)?;
    }
    Ok(QuestionSet::new(set_name(path), questions)?)
}

/// Answer given either as a 0-based index or as an option letter.
#[derive(Deserialize)]
#[serde(untagged)]
enum AnswerField {
    Index(usize),
    Letter(String),
}

/// A CMCQRD-style record. Accepted aliases: `passage`/`text`/`article` for
/// `context`; `answer`/`label` for `answer_index`; `cefr`/`grade` for
/// `level`; `distribution`/`candidate_counts` for `candidate_distribution`.
#[derive(Deserialize)]
pub struct CmcqrdRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(alias = "passage", alias = "text", alias = "article")]
    context: String,
    question: String,
    options: Vec<String>,
    #[serde(alias = "answer", alias = "label")]
    answer_index: AnswerField,
    #[serde(default, alias = "cefr", alias = "grade")]
    level: Option<String>,
    #[serde(default, alias = "distribution", alias = "candidate_counts")]
    candidate_distribution: Option<Vec<f64>>,
}

pub fn load_cmcqrd(path: &Path) -> Result<QuestionSet> {
    let text = fs::read_to_string(path).map_err(|e| DafError::io(path, e))?;
    let records: Vec<(String, std::result::Result<CmcqrdRecord, serde_json::Error>)> =
        if text.trim_start().starts_with('[') {
            let values: Vec<serde_json::Value> = serde_json::from_str(&text)
                .map_err(|e| DafError::Format {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
            values
                .into_iter()
                .enumerate()
                .map(|(i, v)| ((i + 1).to_string(), serde_json::from_value(v)))
                .collect()
        } else {
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| ((i + 1).to_string(), serde_json::from_str(l)))
                .collect()
        };
    let mut questions = Vec::with_capacity(records.len());
    for (n, rec) in records {
        let rec = rec.map_err(|e| record_error(path, format!("record {n}"), e.to_string()))?;
        let id = rec.id.unwrap_or_else(|| n.clone());
        let label = format!("record {n} (id {id})");
        let answer_index = match rec.answer_index {
            AnswerField::Index(i) => i,
            AnswerField::Letter(s) => letter_index(&s)
                .ok_or_else(|| record_error(path, label.clone(), format!("bad answer {s:?}")))?,
        };
        let q = Question {
            id,
            context: rec.context,
            question: rec.question,
            options: rec.options,
            answer_index,
            level: rec.level,
            candidate_distribution: rec.candidate_distribution,
        };
        questions.push(finish_question(path, &label, q)?);
    }
    Ok(QuestionSet::new(set_name(path), questions)?)
}

/// Question counts of each RACE++ split, by level, as published.
pub fn race_plus_plus_reference() -> BTreeMap<&'static str, [(&'static str, usize); 4]> {
    BTreeMap::from([
        ("train", [("RACE-M", 25_241), ("RACE-H", 62_445), ("RACE-C", 12_702), ("total", 100_388)]),
        ("dev", [("RACE-M", 1_436), ("RACE-H", 3_451), ("RACE-C", 712), ("total", 5_599)]),
        ("test", [("RACE-M", 1_436), ("RACE-H", 3_498), ("RACE-C", 708), ("total", 5_642)]),
    ])
}
