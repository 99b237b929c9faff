//! Reference-free quality scoring for multiple-choice reading-comprehension
//! distractors.
//!
//! Three scores are computed for the distractors of a question:
//!
//! * **incorrectness**: a binary reading-comprehension head gives each option a
//!   probability `p_c` of being correct; a distractor is *incorrect* when
//!   `p_c < tau`.
//! * **plausibility**: the probability mass a multi-class head places on the
//!   distractors, `1 - max_y P(y | C, Q, {O})`.
//! * **diversity**: one minus the mean pairwise answer-equivalence score
//!   between distractors.
//!
//! The crate is `no_std` (it needs `alloc`). Model inference lives behind the
//! [`scoring::ScorerBackend`] and [`metrics::EquivalenceScorer`] traits; file
//! formats, the CLI and network clients live in the `daf` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod corpus;
mod math;
pub mod metrics;
pub mod pipeline;
pub mod probing;
pub mod scoring;
pub mod validation;

pub use corpus::{CorpusStats, Question, QuestionSet};
pub use metrics::{DiversityScore, EquivalenceScorer, IncorrectnessDecision, Verdict};
pub use pipeline::{CorpusReport, PipelineConfig, QuestionReport};
pub use scoring::{ConfidenceDistribution, CorrectnessProbability, ScorerBackend, StubBackend};
pub use validation::OperatingPoint;
