//! Run configuration file (TOML) and its merge with command-line flags.
//!
//! Values given on the command line take precedence over the file; the file
//! takes precedence over built-in defaults. Relative paths in the file are
//! resolved against the file's directory.
//!
//! ```toml
//! data = "corpus.jsonl"
//! format = "native-jsonl"
//! tau = 0.25
//! backends = ["m1", "m2"]
//! equivalence = "overlap"
//!
//! [stages]
//! post_filter_diversity = true
//!
//! [backend.m1]
//! kind = "stub"
//! path = "m1.json"
//!
//! [backend.m2]
//! kind = "http"
//! url = "http://localhost:8000/score"
//! concurrent = false
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use daf_core::pipeline::{PipelineConfig, Stages};
use serde::{Deserialize, Serialize};

use crate::backends::BackendSpec;
use crate::dataset::DataFormat;
use crate::error::{DafError, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub tau: Option<f64>,
    pub backends: Option<Vec<String>>,
    pub equivalence: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub context_free: Option<bool>,
    pub sample: Option<usize>,
    pub threads: Option<usize>,
    pub stages: Option<Stages>,
    #[serde(default)]
    pub backend: BTreeMap<String, BackendSpec>,
    #[serde(default)]
    pub probe: ProbeFileConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeFileConfig {
    pub template: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub retry_budget: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| DafError::io(path, e))?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| DafError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.data.as_mut().map(fix);
        self.out.as_mut().map(fix);
        self.probe.template.as_mut().map(fix);
        self.probe.cache.as_mut().map(fix);
        for spec in self.backend.values_mut() {
            if let BackendSpec::Stub { path } = spec {
                fix(path);
            }
        }
    }
}

/// Options shared by every subcommand, as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub tau: Option<f64>,
    pub backends: Vec<String>,
    pub equivalence: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub context_free: bool,
    pub sample: Option<usize>,
    pub threads: Option<usize>,
    pub post_filter_diversity: bool,
    pub no_diversity: bool,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSettings {
    pub data: Option<PathBuf>,
    pub format: DataFormat,
    pub sample: Option<usize>,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    pub pipeline: PipelineConfig,
    #[serde(skip)]
    pub backend_specs: BTreeMap<String, BackendSpec>,
    #[serde(skip)]
    pub probe: ProbeSettings,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeSettings {
    pub template: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub retry_budget: Option<usize>,
}

/// Layers the flags over the file over the defaults.
pub fn resolve(file: Option<FileConfig>, flags: Overrides) -> Result<RunSettings> {
    let file = file.unwrap_or_default();
    let mut pipeline = PipelineConfig::default();
    if let Some(s) = file.stages {
        pipeline.stages = s;
    }
    if flags.post_filter_diversity {
        pipeline.stages.post_filter_diversity = true;
    }
    if flags.no_diversity {
        pipeline.stages.diversity = false;
    }
    pipeline.tau = flags.tau.or(file.tau).unwrap_or(pipeline.tau);
    pipeline.backends = if flags.backends.is_empty() {
        file.backends.unwrap_or_default()
    } else {
        flags.backends
    };
    if let Some(e) = flags.equivalence.or(file.equivalence) {
        pipeline.equivalence = e;
    }
    let out = flags.out.or(file.out);
    pipeline.out = out.map(|p| p.display().to_string());
    pipeline.seed = flags.seed.or(file.seed).unwrap_or(0);
    pipeline.context_free = flags.context_free || file.context_free.unwrap_or(false);
    pipeline
        .validate()
        .map_err(|e| DafError::Config(e.to_string()))?;

    let threads = flags.threads.or(file.threads);
    if threads == Some(0) {
        return Err(DafError::Config("threads must be at least 1".into()));
    }
    Ok(RunSettings {
        data: flags.data.or(file.data),
        format: flags.format.or(file.format).unwrap_or_default(),
        sample: flags.sample.or(file.sample),
        threads,
        pipeline,
        backend_specs: file.backend,
        probe: ProbeSettings {
            template: file.probe.template,
            cache: file.probe.cache,
            parallelism: file.probe.parallelism,
            retry_budget: file.probe.retry_budget,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> FileConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let file = parse(
            r#"
            tau = 0.04
            backends = ["a"]
            seed = 9
            [backend.a]
            kind = "stub"
            path = "a.json"
            "#,
        );
        let flags = Overrides {
            tau: Some(0.5),
            ..Overrides::default()
        };
        let s = resolve(Some(file), flags).unwrap();
        assert_eq!(s.pipeline.tau, 0.5);
        assert_eq!(s.pipeline.backends, vec!["a".to_string()]);
        assert_eq!(s.pipeline.seed, 9);
        assert_eq!(s.pipeline.equivalence, "overlap");
        assert!(s.backend_specs.contains_key("a"));
    }

    #[test]
    fn repeated_backend_flags_replace_file_list() {
        let file = parse(r#"backends = ["a", "b"]"#);
        let flags = Overrides {
            backends: vec!["stub:x.json".into()],
            ..Overrides::default()
        };
        let s = resolve(Some(file), flags).unwrap();
        assert_eq!(s.pipeline.backends, vec!["stub:x.json".to_string()]);
    }

    #[test]
    fn invalid_settings_rejected() {
        assert!(resolve(None, Overrides::default()).is_err());
        let flags = Overrides {
            tau: Some(1.5),
            backends: vec!["stub:x".into()],
            ..Overrides::default()
        };
        assert!(resolve(None, flags).is_err());
        assert!(toml::from_str::<FileConfig>("taw = 0.3").is_err());
    }

    #[test]
    fn relative_paths_follow_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, "data = \"d.jsonl\"\n[backend.m]\nkind = \"stub\"\npath = \"m.json\"\n").unwrap();
        let cfg = FileConfig::load(&p).unwrap();
        assert_eq!(cfg.data.unwrap(), dir.path().join("d.jsonl"));
        assert_eq!(
            cfg.backend["m"],
            BackendSpec::Stub { path: dir.path().join("m.json") }
        );
    }
}
