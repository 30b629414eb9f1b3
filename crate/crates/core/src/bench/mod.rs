//! Benchmark harness: configuration, case generation, the run loop with its
//! JSONL results file, and offline reports.
//!
//! A [`BenchConfig`] has the same JSON shape as the command-line flags.
//! Values are layered: defaults, then an optional config file, then flags
//! ([`ConfigOverrides`]).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agentloop::remote::Provider;
use crate::agentloop::{LoopConfig, DEFAULT_MAX_ITERATIONS};
use crate::fem::Material;
use crate::loadcase::{SchemaError, VariantSpec, FORCE_SCALES, GEOM_SCALES};
use crate::meshing::DEFAULT_RESOLUTION;
use crate::validators::{PipelineConfig, DEFAULT_SF_RANGE};

pub mod cases;
pub mod report;
pub mod runner;

pub use cases::{gen_cases, load_cases, Manifest, MANIFEST_FILE};
pub use report::{load_records, report_file, stats_files, Report, StatsReport};
pub use runner::{run_bench, MockScript, RunSummary, RESULTS_FILE};

pub const DEFAULT_RUNS: usize = 3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Case { path: PathBuf, source: SchemaError },
    #[error("{0}: no run records")]
    EmptyResults(PathBuf),
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Heuristic,
    Mock,
    Generic,
    Anthropic,
    Openai,
}

impl BackendKind {
    pub fn parse(s: &str) -> Option<BackendKind> {
        match s {
            "heuristic" => Some(BackendKind::Heuristic),
            "mock" => Some(BackendKind::Mock),
            other => Provider::parse(other).map(BackendKind::from),
        }
    }

    pub fn provider(self) -> Option<Provider> {
        match self {
            BackendKind::Generic => Some(Provider::Generic),
            BackendKind::Anthropic => Some(Provider::Anthropic),
            BackendKind::Openai => Some(Provider::Openai),
            BackendKind::Heuristic | BackendKind::Mock => None,
        }
    }
}

impl From<Provider> for BackendKind {
    fn from(p: Provider) -> Self {
        match p {
            Provider::Generic => BackendKind::Generic,
            Provider::Anthropic => BackendKind::Anthropic,
            Provider::Openai => BackendKind::Openai,
        }
    }
}

/// Which scale variants of each case to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Variants {
    /// `"all"` for the 5 x 5 scale grid, `"base"` for (1, 1).
    Named(VariantSet),
    /// Explicit `[geom_scale, force_scale]` pairs.
    List(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSet {
    All,
    Base,
}

impl Variants {
    pub fn specs(&self) -> Vec<VariantSpec> {
        match self {
            Variants::Named(VariantSet::All) => GEOM_SCALES
                .iter()
                .flat_map(|&g| FORCE_SCALES.iter().map(move |&f| VariantSpec::new(g, f)))
                .collect(),
            Variants::Named(VariantSet::Base) => vec![VariantSpec::IDENTITY],
            Variants::List(pairs) => pairs.iter().map(|&(g, f)| VariantSpec::new(g, f)).collect(),
        }
    }

    /// Parses `all`, `base` or a comma list of `geom:force` pairs.
    pub fn parse(s: &str) -> Result<Variants, String> {
        match s {
            "all" => return Ok(Variants::Named(VariantSet::All)),
            "base" => return Ok(Variants::Named(VariantSet::Base)),
            _ => {}
        }
        let mut pairs = Vec::new();
        for item in s.split(',') {
            let (g, f) = item
                .split_once(':')
                .ok_or_else(|| format!("expected geom:force, got `{item}`"))?;
            let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
            pairs.push((num(g)?, num(f)?));
        }
        Ok(Variants::List(pairs))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// `builtin`, a directory written by `gen-cases`, or one case file.
    pub cases: String,
    pub variants: Variants,
    pub backend: BackendKind,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub mock_script: Option<PathBuf>,
    pub runs: usize,
    pub max_iters: usize,
    pub resolution: usize,
    pub material: Material,
    pub sf_range: (f64, f64),
    pub temperature: f64,
    pub timeout_secs: u64,
    pub out: PathBuf,
    /// Concurrent runs; 0 picks the number of available cores.
    pub parallel: usize,
    pub seed: u64,
    pub disable_fea_feedback: bool,
    pub single_agent: bool,
    /// Write programs, reports, views and transcripts per run.
    pub artifacts: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let lc = LoopConfig::default();
        BenchConfig {
            cases: "builtin".to_string(),
            variants: Variants::Named(VariantSet::All),
            backend: BackendKind::Heuristic,
            model: None,
            endpoint: None,
            api_key_env: None,
            mock_script: None,
            runs: DEFAULT_RUNS,
            max_iters: DEFAULT_MAX_ITERATIONS,
            resolution: DEFAULT_RESOLUTION,
            material: Material::default(),
            sf_range: DEFAULT_SF_RANGE,
            temperature: lc.temperature,
            timeout_secs: 300,
            out: PathBuf::from("results"),
            parallel: 0,
            seed: 0,
            disable_fea_feedback: false,
            single_agent: false,
            artifacts: true,
        }
    }
}

/// Values given on the command line; `None` leaves the config untouched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub cases: Option<String>,
    pub variants: Option<Variants>,
    pub backend: Option<BackendKind>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub mock_script: Option<PathBuf>,
    pub runs: Option<usize>,
    pub max_iters: Option<usize>,
    pub resolution: Option<usize>,
    pub out: Option<PathBuf>,
    pub parallel: Option<usize>,
    pub seed: Option<u64>,
    pub disable_fea_feedback: Option<bool>,
    pub single_agent: Option<bool>,
    pub artifacts: Option<bool>,
}

impl ConfigOverrides {
    pub fn apply(self, c: &mut BenchConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    c.$f = v;
                }
            )*};
        }
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    c.$f = self.$f;
                }
            )*};
        }
        set!(cases, variants, backend, runs, max_iters, resolution, out, parallel, seed);
        set!(disable_fea_feedback, single_agent, artifacts);
        set_opt!(model, endpoint, api_key_env, mock_script);
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<BenchConfig, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            format!("{path}: {}", e.into_inner())
        })
    }

    /// Defaults, then `file` if given, then `overrides`; validated.
    pub fn load(file: Option<&Path>, overrides: ConfigOverrides) -> Result<BenchConfig, BenchError> {
        let mut c = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| BenchError::io(p, e))?;
                BenchConfig::from_json(&text).map_err(|message| BenchError::Parse {
                    path: p.to_path_buf(),
                    message,
                })?
            }
            None => BenchConfig::default(),
        };
        overrides.apply(&mut c);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.runs < 1 {
            return bad("runs must be at least 1");
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if self.resolution < 2 {
            return bad("resolution must be at least 2");
        }
        let (lo, hi) = self.sf_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return bad("sf_range must satisfy 0 < min < max");
        }
        if let Err(e) = self.material.validate() {
            return Err(BenchError::Config(e.to_string()));
        }
        if self.variants.specs().is_empty() {
            return bad("no variants selected");
        }
        if let Variants::List(pairs) = &self.variants {
            if pairs
                .iter()
                .any(|&(g, f)| !(g > 0.0 && f > 0.0 && g.is_finite() && f.is_finite()))
            {
                return bad("variant scales must be positive");
            }
        }
        match self.backend {
            BackendKind::Mock if self.mock_script.is_none() => bad("the mock backend needs mock_script"),
            BackendKind::Generic | BackendKind::Anthropic | BackendKind::Openai if self.model.is_none() => {
                bad("remote backends need a model id")
            }
            BackendKind::Generic if self.endpoint.is_none() => bad("the generic backend needs an endpoint"),
            _ => Ok(()),
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            pipeline: PipelineConfig {
                resolution: self.resolution,
                material: self.material,
                sf_range: self.sf_range,
                ..PipelineConfig::default()
            },
            max_iterations: self.max_iters,
            temperature: self.temperature,
            fea_feedback: !self.disable_fea_feedback,
            ..LoopConfig::default()
        }
    }

    pub fn worker_count(&self) -> usize {
        if self.parallel > 0 {
            self.parallel
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = BenchConfig::default();
        assert_eq!(c.runs, 3);
        assert_eq!(c.max_iters, 10);
        assert_eq!(c.sf_range, (2.0, 5.0));
        assert_eq!(c.variants.specs().len(), 25);
        assert!(c.validate().is_ok());
        assert!(c.loop_config().fea_feedback);
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.json");
        std::fs::write(&path, r#"{"runs": 5, "seed": 9, "variants": "base", "resolution": 32}"#).unwrap();
        let c = BenchConfig::load(
            Some(&path),
            ConfigOverrides {
                runs: Some(2),
                disable_fea_feedback: Some(true),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c.runs, 2);
        assert_eq!(c.seed, 9);
        assert_eq!(c.resolution, 32);
        assert_eq!(c.variants.specs(), vec![VariantSpec::IDENTITY]);
        assert!(!c.loop_config().fea_feedback);
        assert_eq!(c.max_iters, 10);
    }

    #[test]
    fn round_trips_through_json() {
        let c = BenchConfig {
            variants: Variants::List(vec![(0.5, 2.0)]),
            backend: BackendKind::Anthropic,
            model: Some("m".into()),
            api_key_env: Some("KEY_VAR".into()),
            ..Default::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(BenchConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn invalid_configs() {
        let err = BenchConfig::from_json(r#"{"runz": 3}"#).unwrap_err();
        assert!(err.contains("runz"), "{err}");
        let err = BenchConfig::from_json(r#"{"material": {"youngs_modulus": "x"}}"#).unwrap_err();
        assert!(err.starts_with("material.youngs_modulus"), "{err}");
        for c in [
            BenchConfig {
                runs: 0,
                ..Default::default()
            },
            BenchConfig {
                max_iters: 0,
                ..Default::default()
            },
            BenchConfig {
                sf_range: (5.0, 2.0),
                ..Default::default()
            },
            BenchConfig {
                backend: BackendKind::Mock,
                ..Default::default()
            },
            BenchConfig {
                backend: BackendKind::Openai,
                ..Default::default()
            },
            BenchConfig {
                variants: Variants::List(vec![]),
                ..Default::default()
            },
        ] {
            assert!(matches!(c.validate(), Err(BenchError::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn variant_flag_syntax() {
        assert_eq!(Variants::parse("base").unwrap(), Variants::Named(VariantSet::Base));
        assert_eq!(
            Variants::parse("1:1,2:0.5").unwrap(),
            Variants::List(vec![(1.0, 1.0), (2.0, 0.5)])
        );
        assert!(Variants::parse("1.0").is_err());
        assert!(BackendKind::parse("openai").is_some());
        assert!(BackendKind::parse("gpt").is_none());
    }
}
