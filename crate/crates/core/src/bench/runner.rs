//! Executes (case, variant, run) tuples on a worker pool and appends one
//! RunRecord per line to `<out>/results.jsonl`.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::load_records;
use super::{cases::load_cases, BackendKind, BenchConfig, BenchError};
use crate::agentloop::backend::{AgentBackend, AgentRole, ScriptedBackend};
use crate::agentloop::heuristic::{run_heuristic, HEURISTIC_MODEL_ID};
use crate::agentloop::remote::{RemoteBackend, RemoteConfig};
use crate::agentloop::{run_pipeline, single_agent_pipeline, LoopConfig, RunMeta};
use crate::loadcase::{apply_variant, LoadCase, VariantSpec};
use crate::metrics::RunRecord;

pub const RESULTS_FILE: &str = "results.jsonl";

/// Replies for each role of the scripted mock backend, replayed in order
/// and restarted for every run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockScript {
    pub planner: Vec<String>,
    pub engineer: Vec<String>,
    pub geometry_reviewer: Vec<String>,
    pub structural_reviewer: Vec<String>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<MockScript, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| BenchError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn backend(&self, model_id: &str) -> ScriptedBackend {
        ScriptedBackend::new(model_id)
            .script(AgentRole::Planner, self.planner.iter().cloned())
            .script(AgentRole::Engineer, self.engineer.iter().cloned())
            .script(AgentRole::GeometryReviewer, self.geometry_reviewer.iter().cloned())
            .script(AgentRole::StructuralReviewer, self.structural_reviewer.iter().cloned())
    }
}

enum Driver {
    Heuristic,
    Mock(MockScript, String),
    Remote(RemoteBackend),
}

impl Driver {
    fn new(c: &BenchConfig) -> Result<Driver, BenchError> {
        match c.backend {
            BackendKind::Heuristic => Ok(Driver::Heuristic),
            BackendKind::Mock => {
                let path = c.mock_script.as_deref().expect("validated config");
                let model = c.model.clone().unwrap_or_else(|| "mock".to_string());
                Ok(Driver::Mock(MockScript::load(path)?, model))
            }
            kind => {
                let provider = kind.provider().expect("remote backend kind");
                let mut rc = RemoteConfig::new(provider, c.model.as_deref().expect("validated config"));
                rc.endpoint = c.endpoint.clone();
                rc.api_key_env = c.api_key_env.clone();
                rc.timeout_secs = c.timeout_secs;
                Ok(Driver::Remote(RemoteBackend::new(rc)))
            }
        }
    }

    fn model_id(&self) -> &str {
        match self {
            Driver::Heuristic => HEURISTIC_MODEL_ID,
            Driver::Mock(_, m) => m,
            Driver::Remote(b) => b.model_id(),
        }
    }

    fn run(&self, case: &LoadCase, single_agent: bool, config: &LoopConfig, meta: &RunMeta) -> RunRecord {
        let agents = |b: &dyn AgentBackend| {
            if single_agent {
                single_agent_pipeline(case, b, config, meta).record
            } else {
                run_pipeline(case, b, config, meta).record
            }
        };
        match self {
            Driver::Heuristic => run_heuristic(case, config, meta),
            Driver::Mock(script, model) => agents(&script.backend(model)),
            Driver::Remote(b) => agents(b),
        }
    }
}

/// One scheduled run.
#[derive(Debug, Clone)]
pub struct Task {
    pub case: LoadCase,
    pub variant: VariantSpec,
    pub run_index: usize,
    pub run_seed: u64,
}

/// Every (case, variant, run) tuple in case, variant, run order. Run
/// indices start at 1. Seeds depend only on the master seed and the
/// tuple's position.
pub fn plan_tasks(cases: &[LoadCase], variants: &[VariantSpec], runs: usize, seed: u64) -> Vec<Task> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(cases.len() * variants.len() * runs);
    for case in cases {
        for &v in variants {
            let scaled = apply_variant(case, v);
            for run_index in 1..=runs {
                rng.set_stream(tasks.len() as u64);
                rng.set_word_pos(0);
                tasks.push(Task {
                    case: scaled.clone(),
                    variant: v,
                    run_index,
                    run_seed: rng.next_u64(),
                });
            }
        }
    }
    tasks
}

fn path_component(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// `<out>/<model>/<case>/<variant>/run_<k>/`
pub fn run_dir(out: &Path, model_id: &str, problem_id: &str, variant: VariantSpec, run_index: usize) -> PathBuf {
    out.join(path_component(model_id))
        .join(path_component(problem_id))
        .join(variant.label())
        .join(format!("run_{run_index}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub results: PathBuf,
    pub planned: usize,
    pub skipped: usize,
    pub executed: usize,
    pub valid: usize,
    pub infrastructure: usize,
}

/// Opens the results file for appending, dropping a partial last line left
/// by an interrupted writer.
fn open_results(path: &Path) -> Result<std::fs::File, BenchError> {
    let io = |e| BenchError::io(path, e);
    let mut f = OpenOptions::new()
        .create(true)
        .read(true)
        .append(true)
        .open(path)
        .map_err(io)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(io)?;
    if !bytes.is_empty() && bytes.last() != Some(&b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        f.set_len(keep as u64).map_err(io)?;
        f.seek(SeekFrom::End(0)).map_err(io)?;
    }
    Ok(f)
}

/// Runs every tuple not already in the results file. Records whose run
/// hit an infrastructure failure are retried.
pub fn run_bench(config: &BenchConfig, mut progress: impl FnMut(&RunRecord)) -> Result<RunSummary, BenchError> {
    config.validate()?;
    let cases = load_cases(&config.cases)?;
    let driver = Driver::new(config)?;
    let model_id = driver.model_id().to_string();
    std::fs::create_dir_all(&config.out).map_err(|e| BenchError::io(&config.out, e))?;
    let results = config.out.join(RESULTS_FILE);
    let done: HashSet<_> = if results.exists() {
        load_records(&results)?
            .into_iter()
            .filter(|r| !r.is_infrastructure())
            .map(|r| r.key())
            .collect()
    } else {
        HashSet::new()
    };
    let all = plan_tasks(&cases, &config.variants.specs(), config.runs, config.seed);
    let planned = all.len();
    let tasks: Vec<Task> = all
        .into_iter()
        .filter(|t| {
            !done.contains(&(
                model_id.clone(),
                t.case.problem_id.clone(),
                t.variant.label(),
                t.run_index,
            ))
        })
        .collect();
    let mut summary = RunSummary {
        results: results.clone(),
        planned,
        skipped: planned - tasks.len(),
        executed: 0,
        valid: 0,
        infrastructure: 0,
    };
    let mut file = open_results(&results)?;
    let loop_config = config.loop_config();
    let next = AtomicUsize::new(0);
    let workers = config.worker_count().min(tasks.len()).max(1);
    let (tx, rx) = mpsc::channel::<RunRecord>();
    std::thread::scope(|scope| -> Result<(), BenchError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (tasks, next, driver, loop_config) = (&tasks, &next, &driver, &loop_config);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(t) = tasks.get(i) else { break };
                let meta = RunMeta {
                    run_index: t.run_index,
                    run_seed: t.run_seed,
                    variant: t.variant,
                    out_dir: config.artifacts.then(|| {
                        run_dir(
                            &config.out,
                            driver.model_id(),
                            &t.case.problem_id,
                            t.variant,
                            t.run_index,
                        )
                    }),
                };
                let record = driver.run(&t.case, config.single_agent, loop_config, &meta);
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            let mut line = serde_json::to_string(&record).expect("run record serializes");
            line.push('\n');
            file.write_all(line.as_bytes())
                .map_err(|e| BenchError::io(&results, e))?;
            file.flush().map_err(|e| BenchError::io(&results, e))?;
            summary.executed += 1;
            summary.valid += record.is_valid() as usize;
            summary.infrastructure += record.is_infrastructure() as usize;
            progress(&record);
        }
        Ok(())
    })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{VariantSet, Variants};
    use crate::metrics::FinalStatus;

    fn small(out: &Path) -> BenchConfig {
        BenchConfig {
            cases: "builtin".into(),
            variants: Variants::Named(VariantSet::Base),
            runs: 1,
            max_iters: 2,
            resolution: 16,
            out: out.to_path_buf(),
            parallel: 2,
            artifacts: false,
            ..Default::default()
        }
    }

    #[test]
    fn seeds_are_positional_and_distinct() {
        let cases = vec![crate::loadcase::find_builtin("A_FRAME").unwrap()];
        let v = Variants::Named(VariantSet::All).specs();
        let a = plan_tasks(&cases, &v, 3, 7);
        let b = plan_tasks(&cases, &v, 3, 7);
        assert_eq!(a.len(), 75);
        assert_eq!(
            a.iter().map(|t| t.run_seed).collect::<Vec<_>>(),
            b.iter().map(|t| t.run_seed).collect::<Vec<_>>()
        );
        let distinct: HashSet<u64> = a.iter().map(|t| t.run_seed).collect();
        assert_eq!(distinct.len(), 75);
        assert_ne!(plan_tasks(&cases, &v, 3, 8)[0].run_seed, a[0].run_seed);
        assert_eq!(a[5].variant, v[1]);
        assert_eq!(a[5].run_index, 3);
    }

    #[test]
    fn run_dir_layout() {
        let d = run_dir(
            Path::new("out"),
            "org/model v2",
            "A_FRAME",
            VariantSpec::new(1.5, 0.5),
            2,
        );
        assert_eq!(d, Path::new("out/org_model_v2/A_FRAME/g1.5_f0.5/run_2"));
    }

    #[test]
    fn partial_last_line_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        std::fs::write(&p, "{\"a\":1}\n{\"trunc").unwrap();
        let mut f = open_results(&p).unwrap();
        f.write_all(b"{\"b\":2}\n").unwrap();
        drop(f);
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "{\"a\":1}\n{\"b\":2}\n");
    }

    #[test]
    fn mock_failures_cap_out_and_resume_skips() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("script.json");
        std::fs::write(&script, r#"{"engineer": ["I will not write JSON."]}"#).unwrap();
        let mut c = small(&dir.path().join("out"));
        c.cases = {
            let cases = dir.path().join("cases");
            crate::bench::gen_cases(&cases).unwrap();
            cases.join("A_FRAME.json").to_str().unwrap().to_string()
        };
        c.backend = BackendKind::Mock;
        c.mock_script = Some(script);
        c.runs = 2;
        c.artifacts = true;
        let mut seen = 0;
        let s = run_bench(&c, |_| seen += 1).unwrap();
        assert_eq!((s.planned, s.executed, s.skipped, seen), (2, 2, 0, 2));
        let records = load_records(&s.results).unwrap();
        for r in &records {
            assert_eq!(r.final_status, FinalStatus::IterationCap);
            assert_eq!(r.model_id, "mock");
            assert_eq!(r.iterations.len(), 2);
        }
        assert!(c.out.join("mock/A_FRAME/g1_f1/run_2/transcript.json").exists());
        let again = run_bench(&c, |_| {}).unwrap();
        assert_eq!((again.executed, again.skipped), (0, 2));
        assert_eq!(load_records(&s.results).unwrap().len(), 2);
    }

    #[test]
    fn unreachable_remote_is_infrastructure_and_retried() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(&dir.path().join("out"));
        c.cases = {
            let cases = dir.path().join("cases");
            crate::bench::gen_cases(&cases).unwrap();
            cases.join("AXIAL_TIE_ROD.json").to_str().unwrap().to_string()
        };
        c.backend = BackendKind::Generic;
        c.model = Some("remote-model".into());
        // nothing listens on the discard port
        c.endpoint = Some("http://127.0.0.1:9/chat".into());
        c.timeout_secs = 2;
        let s = run_bench(&c, |_| {}).unwrap();
        assert_eq!((s.executed, s.infrastructure), (1, 1));
        let s = run_bench(&c, |_| {}).unwrap();
        assert_eq!((s.executed, s.skipped), (1, 0));
    }
}
