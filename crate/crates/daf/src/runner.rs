//! Parallel corpus evaluation and seeded sub-sampling.

use daf_core::corpus::QuestionSet;
use daf_core::metrics::EquivalenceScorer;
use daf_core::pipeline::{self, CorpusRun, PipelineConfig, PipelineError, QuestionReport};
use daf_core::scoring::ScorerBackend;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Evaluates every question on the rayon pool. Reports come back in input
/// order whatever the completion order, and aggregation runs over that
/// order, so the result matches [`pipeline::run_corpus`] exactly.
pub fn run_parallel(
    set: &QuestionSet,
    config: &PipelineConfig,
    backends: &[&dyn ScorerBackend],
    equivalence: &dyn EquivalenceScorer,
) -> Result<CorpusRun, PipelineError> {
    config.validate()?;
    if set.is_empty() {
        return Err(PipelineError::EmptySet);
    }
    let reports: Vec<QuestionReport> = set
        .questions()
        .par_iter()
        .map(|q| pipeline::evaluate_question(q, config, backends, equivalence))
        .collect();
    pipeline::finish_run(reports)
}

/// Runs on a dedicated pool of `threads` workers, or the global pool.
pub fn run_with_threads(
    set: &QuestionSet,
    config: &PipelineConfig,
    backends: &[&dyn ScorerBackend],
    equivalence: &dyn EquivalenceScorer,
    threads: Option<usize>,
) -> Result<CorpusRun, PipelineError> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            pool.install(|| run_parallel(set, config, backends, equivalence))
        }
        None => run_parallel(set, config, backends, equivalence),
    }
}

/// `n` questions drawn without replacement, kept in file order. The draw
/// depends only on `seed`, `n` and the set size.
pub fn sample(set: &QuestionSet, n: usize, seed: u64) -> QuestionSet {
    if n >= set.len() {
        return set.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, set.len(), n).into_vec();
    picked.sort_unstable();
    let questions = picked.into_iter().map(|i| set.questions()[i].clone()).collect();
    // a subset of unique ids is still unique
    QuestionSet::new(set.name(), questions).expect("subset keeps ids unique")
}
