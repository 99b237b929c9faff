//! Command-line interface.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use daf_core::corpus::{corpus_stats, QuestionSet};
use daf_core::metrics::EquivalenceScorer;
use daf_core::pipeline::{self, CorpusRun, PipelineConfig};
use daf_core::probing::{self, EchoClient, LlmClient, ProbeDirective, PromptTemplate, Quality, DEFAULT_TEMPLATE};
use daf_core::scoring::ScorerBackend;
use daf_core::validation::{self, Orientation};
use serde_json::json;

use crate::backends::{as_refs, open_backends, open_equivalence};
use crate::config::{resolve, FileConfig, Overrides, RunSettings};
use crate::dataset::{load_dataset, write_native, DataFormat};
use crate::llm::{load_fixture, AnyClient, CachedClient, HttpLlm, ResponseCache};
use crate::report::{self, emit, read_records, Record, RunEcho, Summary};
use crate::runner;

#[derive(Debug, Parser)]
#[command(name = "daf", version, about = "Reference-free distractor quality scoring")]
pub struct Cli {
    /// TOML run configuration. Command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Dataset path (file, or split directory for race-style).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// native-jsonl, race-style or cmcqrd-style.
    #[arg(long)]
    pub format: Option<DataFormat>,
    /// Scoring backend; repeat to ensemble. A config name, `stub:<path>` or `http:<url>`.
    #[arg(long = "backend")]
    pub backends: Vec<String>,
    /// Equivalence scorer: `overlap`, `stub:<path>` or `http:<url>`.
    #[arg(long)]
    pub equivalence: Option<String>,
    /// Incorrectness threshold.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace every passage with the empty string.
    #[arg(long)]
    pub context_free: bool,
    /// Score a seeded random sample of this many questions.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also report diversity of the distractors kept by the filter.
    #[arg(long)]
    pub post_filter_diversity: bool,
    /// Skip the diversity stage.
    #[arg(long)]
    pub no_diversity: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            data: self.data.clone(),
            format: self.format,
            tau: self.tau,
            backends: self.backends.clone(),
            equivalence: self.equivalence.clone(),
            out: self.out.clone(),
            seed: self.seed,
            context_free: self.context_free,
            sample: self.sample,
            threads: self.threads,
            post_filter_diversity: self.post_filter_diversity,
            no_diversity: self.no_diversity,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-question reports plus a corpus summary.
    Score {
        #[command(flatten)]
        common: Common,
        /// Print the summary table to stderr.
        #[arg(long)]
        table: bool,
    },
    /// Write the dataset with only the answer and the kept distractors.
    Filter {
        #[command(flatten)]
        common: Common,
    },
    /// Incorrectness rate over a grid of thresholds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        /// Evenly spaced grid of this many intervals on [0, 1] when --grid is absent.
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Tables from existing report files; comparisons when two are given.
    Report {
        /// Report files written by score or probe.
        files: Vec<PathBuf>,
        /// Histogram bins for the score distributions.
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Dataset to summarise with per-level counts.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        format: Option<DataFormat>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detector precision/recall, operating chart and correlations.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Read per-question reports instead of scoring.
        #[arg(long)]
        reports: Option<PathBuf>,
        /// Intervals of the operating-chart grid.
        #[arg(long, default_value_t = 20)]
        chart_steps: usize,
    },
    /// Ask a language model to refine distractors and rescore.
    Probe {
        #[command(flatten)]
        common: Common,
        /// plaus+, plaus-, div+ or div-.
        #[arg(long)]
        directive: ProbeDirective,
        /// JSONL reply fixture, or `echo` to return the original distractors.
        #[arg(long)]
        mock: Option<String>,
        /// Response cache directory.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Prompt template file.
        #[arg(long)]
        template: Option<PathBuf>,
        /// Maximum concurrent model requests.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Serve only from the cache.
        #[arg(long)]
        offline: bool,
        /// Also write the refined dataset in native format.
        #[arg(long)]
        refined: Option<PathBuf>,
        /// Also compute accuracy without passages.
        #[arg(long)]
        with_context_free: bool,
    },
    /// Per-level question and passage counts.
    Stats {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        format: Option<DataFormat>,
        #[arg(long)]
        json: bool,
    },
}

fn settings(config: Option<&Path>, common: &Common) -> anyhow::Result<RunSettings> {
    let file = config.map(FileConfig::load).transpose()?;
    Ok(resolve(file, common.overrides())?)
}

fn load(settings: &RunSettings) -> anyhow::Result<QuestionSet> {
    let path = settings
        .data
        .as_deref()
        .context("no dataset given; pass --data or set `data` in the config")?;
    let set = load_dataset(path, settings.format)?;
    Ok(match settings.sample {
        Some(n) => runner::sample(&set, n, settings.pipeline.seed),
        None => set,
    })
}

struct Scorers {
    backends: Vec<Box<dyn ScorerBackend>>,
    equivalence: Box<dyn EquivalenceScorer>,
}

impl Scorers {
    fn open(settings: &RunSettings) -> anyhow::Result<Self> {
        Ok(Self {
            backends: open_backends(&settings.pipeline.backends, &settings.backend_specs)?,
            equivalence: open_equivalence(&settings.pipeline.equivalence)?,
        })
    }

    fn run(&self, set: &QuestionSet, config: &PipelineConfig, threads: Option<usize>) -> anyhow::Result<CorpusRun> {
        let refs = as_refs(&self.backends);
        Ok(runner::run_with_threads(set, config, &refs, self.equivalence.as_ref(), threads)?)
    }
}

fn out_path(settings: &RunSettings) -> Option<PathBuf> {
    settings.pipeline.out.as_ref().map(PathBuf::from)
}

fn run_records(set: &QuestionSet, config: &PipelineConfig, run: &CorpusRun) -> Vec<Record> {
    let mut records: Vec<Record> = run.reports.iter().cloned().map(Record::Question).collect();
    records.push(Record::Summary(Summary::new(RunEcho::new(set, config), run.summary.clone())));
    records
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Score { common, table } => {
            let s = settings(config, &common)?;
            let set = load(&s)?;
            let run = Scorers::open(&s)?.run(&set, &s.pipeline, s.threads)?;
            emit(&run_records(&set, &s.pipeline, &run), out_path(&s).as_deref())?;
            if table {
                eprint!("{}", report::render_table(&run.summary));
            }
        }
        Command::Filter { common } => {
            let s = settings(config, &common)?;
            let set = load(&s)?;
            let run = Scorers::open(&s)?.run(&set, &s.pipeline, s.threads)?;
            let mut kept = Vec::new();
            let mut dropped = 0usize;
            for (q, r) in set.questions().iter().zip(&run.reports) {
                match pipeline::filtered_question(q, r) {
                    Some(f) if f.options.len() >= 2 => kept.push(f),
                    _ => dropped += 1,
                }
            }
            let filtered = QuestionSet::new(set.name(), kept)?;
            match out_path(&s) {
                Some(p) => crate::dataset::save_native(&filtered, &p)?,
                None => write_native(&filtered, std::io::stdout().lock())?,
            }
            if dropped > 0 {
                eprintln!("{dropped} questions left with no distractor or failed, omitted");
            }
        }
        Command::Sweep { common, grid, steps } => {
            let s = settings(config, &common)?;
            let set = load(&s)?;
            let run = Scorers::open(&s)?.run(&set, &s.pipeline, s.threads)?;
            let grid = if grid.is_empty() { pipeline::uniform_grid(steps) } else { grid };
            let rows = pipeline::sweep_tau(&run.reports, &grid)?;
            let records: Vec<Record> = rows.into_iter().map(Record::Sweep).collect();
            emit(&records, out_path(&s).as_deref())?;
        }
        Command::Report {
            files,
            bins,
            data,
            format,
            out,
        } => report_command(config, &files, bins, data, format, out)?,
        Command::Validate {
            common,
            reports,
            chart_steps,
        } => {
            let s = settings_for_validate(config, &common, reports.is_some())?;
            let set = load(&s)?;
            let question_reports = match &reports {
                Some(p) => report::question_reports(&read_records(p)?),
                None => Scorers::open(&s)?.run(&set, &s.pipeline, s.threads)?.reports,
            };
            let records = validation_records(&set, &question_reports, chart_steps)?;
            emit(&records, out_path(&s).as_deref())?;
        }
        Command::Probe {
            common,
            directive,
            mock,
            cache,
            template,
            parallelism,
            offline,
            refined,
            with_context_free,
        } => {
            let s = settings(config, &common)?;
            let set = load(&s)?;
            let template_path = template.or(s.probe.template.clone());
            let template = match template_path {
                Some(p) => PromptTemplate::new(
                    std::fs::read_to_string(&p).with_context(|| format!("reading template {}", p.display()))?,
                ),
                None => PromptTemplate::new(DEFAULT_TEMPLATE),
            };
            let client = match (mock.as_deref(), offline) {
                (_, true) => None,
                (Some("echo"), _) => Some(AnyClient::Echo(EchoClient::new(&set))),
                (Some(path), _) => Some(AnyClient::Scripted(load_fixture(Path::new(path))?)),
                (None, _) => Some(AnyClient::Http(HttpLlm::from_env()?)),
            };
            let cache_dir = cache.or(s.probe.cache.clone());
            let options = ProbeOptions {
                directive,
                template,
                parallelism: parallelism.or(s.probe.parallelism).unwrap_or(4),
                retry_budget: s.probe.retry_budget.unwrap_or(probing::DEFAULT_RETRY_BUDGET),
                with_context_free,
            };
            if offline && cache_dir.is_none() {
                bail!("--offline needs a cache directory");
            }
            let scorers = Scorers::open(&s)?;
            let outcome = match (&client, cache_dir) {
                (c, Some(dir)) => {
                    let inner: Option<&(dyn LlmClient + Sync)> = c.as_ref().map(|c| c as _);
                    let cached = CachedClient::new(inner, ResponseCache::open(&dir)?, &options.template);
                    cached
                        .prefetch(&set, directive, &options.template, options.parallelism)
                        .map_err(|e| anyhow::anyhow!(e))?;
                    probe(&set, &s, &scorers, &cached, &options)?
                }
                (Some(c), None) => probe(&set, &s, &scorers, c, &options)?,
                (None, None) => unreachable!("offline without cache rejected above"),
            };
            match outcome {
                Ok((records, refined_set)) => {
                    emit(&records, out_path(&s).as_deref())?;
                    if let Some(p) = refined {
                        crate::dataset::save_native(&refined_set, &p)?;
                    }
                }
                Err((partial, err)) => {
                    emit(&partial, out_path(&s).as_deref())?;
                    return Err(err);
                }
            }
        }
        Command::Stats { data, format, json } => {
            let s = resolve_data_only(config, data, format)?;
            let set = load(&s)?;
            let stats = corpus_stats(&set);
            if json {
                println!("{}", serde_json::to_string(&Record::Stats(stats))?);
            } else {
                print!("{}", report::render_stats(&stats));
            }
        }
    }
    Ok(())
}

/// Validation from stored reports needs no backend.
fn settings_for_validate(config: Option<&Path>, common: &Common, from_reports: bool) -> anyhow::Result<RunSettings> {
    if !from_reports {
        return settings(config, common);
    }
    let mut o = common.overrides();
    if o.backends.is_empty() {
        o.backends.push("unused".into());
    }
    let file = config.map(FileConfig::load).transpose()?;
    Ok(resolve(file, o)?)
}

fn resolve_data_only(config: Option<&Path>, data: Option<PathBuf>, format: Option<DataFormat>) -> anyhow::Result<RunSettings> {
    let o = Overrides {
        data,
        format,
        backends: vec!["unused".into()],
        ..Overrides::default()
    };
    let file = config.map(FileConfig::load).transpose()?;
    Ok(resolve(file, o)?)
}

pub fn validation_records(
    set: &QuestionSet,
    reports: &[pipeline::QuestionReport],
    chart_steps: usize,
) -> anyhow::Result<Vec<Record>> {
    let items = validation::scored_options(reports);
    let mut records = Vec::new();
    for orientation in [Orientation::IncorrectPositive, Orientation::CorrectPositive] {
        let curve = validation::pr_curve(&items, orientation)?;
        records.extend(curve.points.iter().map(|&point| Record::PrPoint { orientation, point }));
        records.push(Record::Best {
            orientation,
            point: curve.best,
        });
    }
    let grid = pipeline::uniform_grid(chart_steps);
    records.extend(validation::operating_chart(&items, &grid).into_iter().map(Record::Chart));
    match validation::intra_question_correlation_from_reports(set, reports) {
        Ok(c) => records.push(Record::IntraCorrelation(c)),
        Err(e) => records.push(Record::CorrelationError {
            which: "intra".into(),
            message: e.to_string(),
        }),
    }
    match validation::inter_question_correlation_from_reports(set, reports) {
        Ok(c) => records.push(Record::InterCorrelation(c)),
        Err(e) => records.push(Record::CorrelationError {
            which: "inter".into(),
            message: e.to_string(),
        }),
    }
    Ok(records)
}

struct ProbeOptions {
    directive: ProbeDirective,
    template: PromptTemplate,
    parallelism: usize,
    retry_budget: usize,
    with_context_free: bool,
}

type ProbeResult = Result<(Vec<Record>, QuestionSet), (Vec<Record>, anyhow::Error)>;

fn probe(
    set: &QuestionSet,
    s: &RunSettings,
    scorers: &Scorers,
    client: &dyn LlmClient,
    o: &ProbeOptions,
) -> anyhow::Result<ProbeResult> {
    let refinements = match probing::refine_corpus(set, o.directive, &o.template, client, o.retry_budget) {
        Ok(r) => r,
        Err(probing::ProbeError::Client {
            question_id,
            source,
            partial,
        }) => {
            let records = partial.into_iter().map(Record::Refinement).collect();
            let err = anyhow::anyhow!("probing aborted at question {question_id}: {source}");
            return Ok(Err((records, err)));
        }
        Err(e) => return Err(e.into()),
    };
    let refined = probing::refined_set(set, &refinements);
    let vanilla = scorers.run(set, &s.pipeline, s.threads)?;
    let run = scorers.run(&refined, &s.pipeline, s.threads)?;
    let context_free = if o.with_context_free {
        let mut cfg = s.pipeline.clone();
        cfg.context_free = true;
        cfg.stages.diversity = false;
        cfg.stages.post_filter_diversity = false;
        Some(scorers.run(&refined, &cfg, s.threads)?.summary.overall.accuracy)
    } else {
        None
    };
    let parse_failures = refinements
        .iter()
        .filter(|r| r.parse_status == probing::ParseStatus::Failed)
        .count();

    let mut records: Vec<Record> = refinements.into_iter().map(Record::Refinement).collect();
    records.extend(run.reports.iter().cloned().map(Record::Question));
    let summary = Summary::new(RunEcho::new(&refined, &s.pipeline), run.summary.clone());
    records.push(Record::ProbeSummary(report::ProbeRecord {
        directive: o.directive,
        vanilla_accuracy: vanilla.summary.overall.accuracy,
        context_free_accuracy: context_free,
        parse_failures,
        run: summary.run,
        report: summary.report,
        display: summary.display,
    }));
    Ok(Ok((records, refined)))
}

fn report_command(
    config: Option<&Path>,
    files: &[PathBuf],
    bins: usize,
    data: Option<PathBuf>,
    format: Option<DataFormat>,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    if files.is_empty() && data.is_none() {
        bail!("report needs at least one report file or --data");
    }
    let mut records = Vec::new();
    let mut sets = Vec::new();
    for f in files {
        let recs = read_records(f)?;
        let reports = report::question_reports(&recs);
        if reports.is_empty() {
            bail!("{}: no question records", f.display());
        }
        let summary = pipeline::summarize(&reports);
        let name = f.display().to_string();
        println!("{name}");
        print!("{}", report::render_table(&summary));
        for quality in [Quality::Plausibility, Quality::Diversity] {
            let values: Vec<f64> = reports
                .iter()
                .filter_map(|r| match quality {
                    Quality::Plausibility => r.plausibility(),
                    Quality::Diversity => r.diversity(),
                })
                .collect();
            records.push(Record::Histogram {
                set: name.clone(),
                quality,
                bins,
                counts: probing::score_histogram(&values, bins)?,
            });
        }
        sets.push(reports);
    }
    if let [a, b] = sets.as_slice() {
        for quality in [Quality::Plausibility, Quality::Diversity] {
            let result = probing::compare_sets(a, b, quality)?;
            println!(
                "{quality:?} of first > second: {:.1}% of {} questions",
                100.0 * result.fraction,
                result.compared
            );
            records.push(Record::Comparison { quality, result });
        }
    }
    if data.is_some() {
        let s = resolve_data_only(config, data, format)?;
        let stats = corpus_stats(&load(&s)?);
        print!("{}", report::render_stats(&stats));
        records.push(Record::Stats(stats));
    }
    if let Some(p) = out {
        emit(&records, Some(&p))?;
    }
    Ok(())
}

/// Machine-readable error record for stderr.
pub fn error_record(err: &anyhow::Error) -> serde_json::Value {
    let kind = if let Some(e) = err.downcast_ref::<crate::error::DafError>() {
        match e {
            crate::error::DafError::Io { .. } => "io",
            crate::error::DafError::Record { .. } => "record",
            crate::error::DafError::Format { .. } => "format",
            crate::error::DafError::UnknownBackend(_) => "unknown_backend",
            crate::error::DafError::UnknownEquivalence(_) => "unknown_equivalence",
            crate::error::DafError::Config(_) => "config",
            crate::error::DafError::Set(_) => "dataset",
        }
    } else if err.downcast_ref::<pipeline::PipelineError>().is_some() {
        "pipeline"
    } else if err.downcast_ref::<validation::ValidationError>().is_some() {
        "validation"
    } else {
        "error"
    };
    // most of our errors already render their cause; only add what is new
    let mut message = String::new();
    for cause in err.chain().map(|c| c.to_string()) {
        if message.is_empty() {
            message = cause;
        } else if !message.contains(&cause) {
            message = format!("{message}: {cause}");
        }
    }
    json!({ "error": { "kind": kind, "message": message } })
}
