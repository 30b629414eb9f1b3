//! Offline reports over results files.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::metrics::stats::{
    fisher_exact, kruskal_wallis, mean_sd, welch_t_samples, FisherResult, KruskalResult, WelchResult,
};
use crate::metrics::{render_text_report, summarize, ModelSummary, RunRecord};

/// Parses a JSONL results file. A partial last line (no trailing newline)
/// is ignored; any other malformed line is an error naming its number.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !complete => {}
            Err(e) => {
                return Err(BenchError::Parse {
                    path: path.to_path_buf(),
                    message: format!("line {}: {e}", i + 1),
                })
            }
        }
    }
    Ok(out)
}

/// Keeps the last record for each run key, in first-seen order.
pub fn latest_per_run(records: Vec<RunRecord>) -> Vec<RunRecord> {
    let mut slot = HashMap::new();
    let mut out: Vec<RunRecord> = Vec::new();
    for r in records {
        match slot.get(&r.key()) {
            Some(&i) => out[i] = r,
            None => {
                slot.insert(r.key(), out.len());
                out.push(r);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: usize,
    pub models: Vec<ModelSummary>,
}

impl Report {
    pub fn from_records(records: &[RunRecord]) -> Report {
        Report {
            records: records.len(),
            models: summarize(records),
        }
    }

    pub fn text(&self) -> String {
        render_text_report(&self.models)
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn report_file(path: &Path) -> Result<Report, BenchError> {
    let records = latest_per_run(load_records(path)?);
    if records.is_empty() {
        return Err(BenchError::EmptyResults(path.to_path_buf()));
    }
    Ok(Report::from_records(&records))
}

/// Either a result or the reason the test could not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Insufficient(String),
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(t) => Some(t),
            Outcome::Insufficient(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    /// Runs after dropping infrastructure failures.
    pub runs: usize,
    /// Runs ending valid, i.e. with SF in the target range.
    pub successes: usize,
    pub iterations_to_valid: Vec<f64>,
}

impl Group {
    pub fn from_records(name: &str, records: &[RunRecord]) -> Group {
        let kept: Vec<&RunRecord> = records.iter().filter(|r| !r.is_infrastructure()).collect();
        Group {
            name: name.to_string(),
            runs: kept.len(),
            successes: kept.iter().filter(|r| r.is_valid()).count(),
            iterations_to_valid: kept
                .iter()
                .filter_map(|r| r.iterations_to_valid.map(|k| k as f64))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub a: String,
    pub b: String,
    /// Rows are groups, columns are (successes, failures).
    pub table: [[u64; 2]; 2],
    pub fisher: Outcome<FisherResult>,
    pub welch: Outcome<WelchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub groups: Vec<Group>,
    /// Every group against the first.
    pub pairs: Vec<PairStats>,
    pub kruskal: Outcome<KruskalResult>,
}

fn pair(a: &Group, b: &Group) -> PairStats {
    let table = [
        [a.successes as u64, (a.runs - a.successes) as u64],
        [b.successes as u64, (b.runs - b.successes) as u64],
    ];
    let fisher = if a.runs == 0 || b.runs == 0 {
        Outcome::Insufficient("a group has no runs".into())
    } else {
        Outcome::Ok(fisher_exact(table))
    };
    let (x, y) = (&a.iterations_to_valid, &b.iterations_to_valid);
    let welch = if x.len() < 2 || y.len() < 2 {
        Outcome::Insufficient("each group needs at least 2 valid runs".into())
    } else if mean_sd(x).1 == 0.0 && mean_sd(y).1 == 0.0 {
        Outcome::Insufficient("both groups have zero variance".into())
    } else {
        Outcome::Ok(welch_t_samples(x, y))
    };
    PairStats {
        a: a.name.clone(),
        b: b.name.clone(),
        table,
        fisher,
        welch,
    }
}

impl StatsReport {
    pub fn from_groups(groups: Vec<Group>) -> StatsReport {
        let pairs = groups.iter().skip(1).map(|g| pair(&groups[0], g)).collect();
        let samples: Vec<Vec<f64>> = groups.iter().map(|g| g.iterations_to_valid.clone()).collect();
        let kruskal = if groups.len() < 2 {
            Outcome::Insufficient("needs at least 2 groups".into())
        } else if samples.iter().any(|s| s.is_empty()) {
            Outcome::Insufficient("a group has no valid runs".into())
        } else {
            Outcome::Ok(kruskal_wallis(&samples))
        };
        StatsReport { groups, pairs, kruskal }
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        for g in &self.groups {
            s += &format!(
                "{}: {}/{} valid, iterations to valid n={}\n",
                g.name,
                g.successes,
                g.runs,
                g.iterations_to_valid.len()
            );
        }
        for p in &self.pairs {
            s += &format!("\n{} vs {}\n", p.a, p.b);
            match &p.fisher {
                Outcome::Ok(f) => {
                    s += &format!(
                        "  Fisher exact {:?}: p = {:.4} (greater {:.4}, less {:.4})\n",
                        p.table, f.two_sided, f.greater, f.less
                    )
                }
                Outcome::Insufficient(why) => s += &format!("  Fisher exact: insufficient data ({why})\n"),
            }
            match &p.welch {
                Outcome::Ok(w) => s += &format!("  Welch t: t = {:.3}, df = {:.2}, p = {:.4}\n", w.t, w.df, w.p),
                Outcome::Insufficient(why) => s += &format!("  Welch t: insufficient data ({why})\n"),
            }
        }
        match &self.kruskal {
            Outcome::Ok(k) => s += &format!("\nKruskal-Wallis: H = {:.3}, df = {}, p = {:.4}\n", k.h, k.df, k.p),
            Outcome::Insufficient(why) => s += &format!("\nKruskal-Wallis: insufficient data ({why})\n"),
        }
        s
    }
}

fn group_name(path: &Path, taken: &[Group]) -> String {
    let base = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    if taken.iter().any(|g| g.name == base) {
        path.display().to_string()
    } else {
        base
    }
}

/// One group per results file.
pub fn stats_files(paths: &[PathBuf]) -> Result<StatsReport, BenchError> {
    let mut groups = Vec::new();
    for p in paths {
        let records = latest_per_run(load_records(p)?);
        if records.is_empty() {
            return Err(BenchError::EmptyResults(p.clone()));
        }
        let name = group_name(p, &groups);
        groups.push(Group::from_records(&name, &records));
    }
    Ok(StatsReport::from_groups(groups))
}
