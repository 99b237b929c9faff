//! Synthetic corpus shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use daf_core::corpus::Question;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub struct Fixture {
    pub questions: Vec<Question>,
    /// Logits per question id, one per option.
    pub logits: BTreeMap<String, Vec<f64>>,
    /// Ordered-pair equivalence scores; pairs not listed score `eq_default`.
    pub eq: BTreeMap<(String, String), f64>,
    pub eq_default: f64,
}

pub struct Files {
    pub data: PathBuf,
    pub stub: PathBuf,
    pub equivalence: PathBuf,
}

const LEVELS: [&str; 3] = ["B1", "B2", "C1"];

/// `n` questions. Logits are multiples of 1/4 and equivalence scores
/// multiples of 1/8. Every fifth question has only two options, so its
/// diversity is undefined.
pub fn synthetic(n: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut questions = Vec::new();
    let mut logits = BTreeMap::new();
    let mut eq = BTreeMap::new();
    for i in 0..n {
        let id = format!("s{i:02}");
        let k = if i % 5 == 4 { 2 } else { 4 };
        let options: Vec<String> = (0..k).map(|j| format!("{id} option {j}")).collect();
        let answer = rng.random_range(0..k);
        let row: Vec<f64> = (0..k).map(|_| rng.random_range(-16i32..=12) as f64 / 4.0).collect();
        let counts: Vec<f64> = (0..k).map(|_| rng.random_range(1u32..=40) as f64).collect();
        for a in 0..k {
            for b in 0..k {
                if a != b && a != answer && b != answer {
                    let v = rng.random_range(0u32..=8) as f64 / 8.0;
                    eq.insert((options[a].clone(), options[b].clone()), v);
                }
            }
        }
        let q = Question::new(
            id.clone(),
            format!("passage {}", i / 2),
            format!("question {i}?"),
            options,
            answer,
        )
        .with_level(LEVELS[i % 3])
        .with_candidate_distribution(counts);
        logits.insert(id, row);
        questions.push(q);
    }
    Fixture {
        questions,
        logits,
        eq,
        eq_default: 0.0,
    }
}

impl Fixture {
    pub fn write(&self, dir: &Path) -> Files {
        let data = dir.join("corpus.jsonl");
        let mut body = String::new();
        for q in &self.questions {
            body.push_str(&serde_json::to_string(q).unwrap());
            body.push('\n');
        }
        fs::write(&data, body).unwrap();

        let stub = dir.join("mrc.json");
        fs::write(&stub, json!({ "name": "mrc", "logits": self.logits }).to_string()).unwrap();

        let equivalence = dir.join("eq.json");
        let pairs: Vec<_> = self.eq.iter().map(|((a, b), v)| json!([a, b, v])).collect();
        fs::write(
            &equivalence,
            json!({ "default": self.eq_default, "pairs": pairs }).to_string(),
        )
        .unwrap();
        Files {
            data,
            stub,
            equivalence,
        }
    }
}
