//! Benchmark metrics: reliability (R1–R3), design quality (DQ1–DQ5),
//! process efficiency (PE1), the failure histogram and significance tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::loadcase::VariantSpec;
use crate::validators::{FailureCategory, SfBand, ValidationReport};

pub mod stats;

/// Histogram bucket for runs that ended with a passing design outside the
/// target safety-factor band.
pub const OUT_OF_RANGE_LABEL: &str = "SF out of range";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration_index: usize,
    pub compile_ok: bool,
    pub mesh_ok: bool,
    pub fea_ok: bool,
    pub safety_factor: Option<f64>,
    pub volume_mm3: Option<f64>,
    pub face_count: Option<usize>,
    pub design_space_violated: bool,
    pub violation_ratio: f64,
    pub failure_category: Option<FailureCategory>,
    pub sf_band: Option<SfBand>,
    pub accepted: bool,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub wall_seconds: f64,
}

impl IterationRecord {
    /// Stage flags and measurements from a validation report. Token and
    /// timing fields start at zero.
    pub fn from_report(iteration_index: usize, report: &ValidationReport) -> Self {
        let compile_ok = report.compile_ok;
        let mesh_ok = compile_ok && report.mesh_ok();
        let fea_ok = mesh_ok && report.fea_ok();
        IterationRecord {
            iteration_index,
            compile_ok,
            mesh_ok,
            fea_ok,
            safety_factor: report.safety_factor(),
            volume_mm3: report.volume,
            face_count: report.face_count,
            design_space_violated: report.design_space.is_some_and(|d| d.violated),
            violation_ratio: report.design_space.map_or(0.0, |d| d.violation_ratio),
            failure_category: report.failure(),
            sf_band: report.fea.as_ref().and_then(|f| f.band),
            accepted: report.accepted(),
            input_tokens: 0,
            output_tokens: 0,
            wall_seconds: 0.0,
        }
    }

    /// An iteration whose program never compiled.
    pub fn compile_failure(iteration_index: usize) -> Self {
        IterationRecord {
            iteration_index,
            compile_ok: false,
            mesh_ok: false,
            fea_ok: false,
            safety_factor: None,
            volume_mm3: None,
            face_count: None,
            design_space_violated: false,
            violation_ratio: 0.0,
            failure_category: Some(FailureCategory::Compile),
            sf_band: None,
            accepted: false,
            input_tokens: 0,
            output_tokens: 0,
            wall_seconds: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "category")]
pub enum FinalStatus {
    Valid,
    /// The run stopped before the cap on an unrecoverable design error.
    Failed(FailureCategory),
    IterationCap,
    /// Physics feedback disabled: the run ended on a design that passed the
    /// geometry checks with a safety factor outside the target band.
    OutOfRange,
    /// Backend transport failure; excluded from every metric.
    Infrastructure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    MultiAgent,
    SingleAgent,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model_id: String,
    pub problem_id: String,
    pub variant: VariantSpec,
    pub run_index: usize,
    pub run_seed: u64,
    pub mode: RunMode,
    pub fea_feedback: bool,
    pub iterations: Vec<IterationRecord>,
    pub final_status: FinalStatus,
    /// Category of the last failing iteration, if the run did not end valid.
    pub failure_category: Option<FailureCategory>,
    pub iterations_to_valid: Option<usize>,
    pub final_safety_factor: Option<f64>,
    pub sf_band: Option<SfBand>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn new(model_id: &str, problem_id: &str, variant: VariantSpec, run_index: usize, mode: RunMode) -> Self {
        RunRecord {
            model_id: model_id.to_string(),
            problem_id: problem_id.to_string(),
            variant,
            run_index,
            run_seed: 0,
            mode,
            fea_feedback: true,
            iterations: Vec::new(),
            final_status: FinalStatus::IterationCap,
            failure_category: None,
            iterations_to_valid: None,
            final_safety_factor: None,
            sf_band: None,
            input_tokens: 0,
            output_tokens: 0,
            wall_seconds: 0.0,
            error: None,
        }
    }

    /// Appends an iteration and refreshes the token totals.
    pub fn push(&mut self, it: IterationRecord) {
        self.input_tokens += it.input_tokens;
        self.output_tokens += it.output_tokens;
        self.iterations.push(it);
    }

    /// Sets the final status from the last iteration: valid if it was
    /// accepted, otherwise the iteration cap.
    pub fn close(&mut self) {
        let last = self.iterations.last();
        self.final_safety_factor = last.and_then(|i| i.safety_factor);
        self.sf_band = last.and_then(|i| i.sf_band);
        if last.is_some_and(|i| i.accepted) {
            self.final_status = FinalStatus::Valid;
            self.iterations_to_valid = Some(self.iterations.len());
            self.failure_category = None;
        } else {
            self.final_status = FinalStatus::IterationCap;
            self.iterations_to_valid = None;
            self.failure_category = last.and_then(|i| i.failure_category);
        }
    }

    /// Key identifying the run for resume purposes.
    pub fn key(&self) -> (String, String, String, usize) {
        (
            self.model_id.clone(),
            self.problem_id.clone(),
            self.variant.label(),
            self.run_index,
        )
    }

    pub fn is_infrastructure(&self) -> bool {
        self.final_status == FinalStatus::Infrastructure
    }

    pub fn is_valid(&self) -> bool {
        self.final_status == FinalStatus::Valid
    }

    /// The record with wall-clock fields zeroed, for comparing repeats.
    pub fn without_timing(&self) -> RunRecord {
        let mut r = self.clone();
        r.wall_seconds = 0.0;
        for it in &mut r.iterations {
            it.wall_seconds = 0.0;
        }
        r
    }

    /// Histogram bucket of a run that did not end valid.
    pub fn failure_label(&self) -> Option<String> {
        match self.final_status {
            FinalStatus::Valid | FinalStatus::Infrastructure => None,
            FinalStatus::Failed(c) => Some(c.label().to_string()),
            FinalStatus::OutOfRange => Some(OUT_OF_RANGE_LABEL.to_string()),
            FinalStatus::IterationCap => Some(
                self.failure_category
                    .map_or(OUT_OF_RANGE_LABEL, FailureCategory::label)
                    .to_string(),
            ),
        }
    }
}

/// Sum over values sorted by magnitude order, so the result does not depend
/// on record order.
fn stable_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| stable_sum(values) / values.len() as f64)
}

fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let sq: Vec<f64> = values.iter().map(|x| (x - m) * (x - m)).collect();
    Some((stable_sum(&sq) / (values.len() - 1) as f64).sqrt())
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

fn scored(records: &[RunRecord]) -> impl Iterator<Item = &RunRecord> {
    records.iter().filter(|r| !r.is_infrastructure())
}

/// Stage success rates in percent over all iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    pub iterations: usize,
    pub compiled: usize,
    pub meshed: usize,
    pub solved: usize,
    pub r1: Option<f64>,
    /// Meshed over compiled.
    pub r2: Option<f64>,
    /// Solved over meshed.
    pub r3: Option<f64>,
    /// Meshed over all iterations.
    pub r2_unconditional: Option<f64>,
    /// Solved over all iterations.
    pub r3_unconditional: Option<f64>,
}

pub fn reliability(records: &[RunRecord]) -> Reliability {
    let its: Vec<&IterationRecord> = scored(records).flat_map(|r| &r.iterations).collect();
    let n = its.len();
    let compiled = its.iter().filter(|i| i.compile_ok).count();
    let meshed = its.iter().filter(|i| i.compile_ok && i.mesh_ok).count();
    let solved = its.iter().filter(|i| i.compile_ok && i.mesh_ok && i.fea_ok).count();
    Reliability {
        iterations: n,
        compiled,
        meshed,
        solved,
        r1: percent(compiled, n),
        r2: percent(meshed, compiled),
        r3: percent(solved, meshed),
        r2_unconditional: percent(meshed, n),
        r3_unconditional: percent(solved, n),
    }
}

/// Statistics over the final design of every run whose last iteration
/// reached a successful FEA solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignQuality {
    pub designs: usize,
    pub dq1_mean: Option<f64>,
    pub dq1_sd: Option<f64>,
    /// Mean of SF per cm³.
    pub dq2: Option<f64>,
    pub dq3: Option<f64>,
    /// Percent of designs violating the design space.
    pub dq4: Option<f64>,
    /// Mean violation ratio in percent.
    pub dq5_mean: Option<f64>,
    pub dq5_sd: Option<f64>,
}

pub fn design_quality(records: &[RunRecord]) -> DesignQuality {
    let finals: Vec<&IterationRecord> = scored(records)
        .filter_map(|r| r.iterations.last())
        .filter(|i| i.fea_ok)
        .collect();
    let sf: Vec<f64> = finals.iter().filter_map(|i| i.safety_factor).collect();
    let sfr: Vec<f64> = finals
        .iter()
        .filter_map(|i| match (i.safety_factor, i.volume_mm3) {
            (Some(s), Some(v)) if v > 0.0 => Some(s / (v / 1000.0)),
            _ => None,
        })
        .collect();
    let faces: Vec<f64> = finals.iter().filter_map(|i| i.face_count).map(|f| f as f64).collect();
    let ratios: Vec<f64> = finals.iter().map(|i| 100.0 * i.violation_ratio).collect();
    let violated = finals.iter().filter(|i| i.design_space_violated).count();
    DesignQuality {
        designs: finals.len(),
        dq1_mean: mean(&sf),
        dq1_sd: sample_sd(&sf),
        dq2: mean(&sfr),
        dq3: mean(&faces),
        dq4: percent(violated, finals.len()),
        dq5_mean: mean(&ratios),
        dq5_sd: sample_sd(&ratios),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessEfficiency {
    pub runs: usize,
    pub successes: usize,
    /// Mean iterations to a valid design over successful runs.
    pub pe1: Option<f64>,
    pub pe1_sd: Option<f64>,
    /// Percent of runs that never reached a valid design.
    pub failure_rate: Option<f64>,
}

pub fn process_efficiency(records: &[RunRecord]) -> ProcessEfficiency {
    let runs: Vec<&RunRecord> = scored(records).collect();
    let its: Vec<f64> = runs
        .iter()
        .filter(|r| r.is_valid())
        .filter_map(|r| r.iterations_to_valid)
        .map(|k| k as f64)
        .collect();
    ProcessEfficiency {
        runs: runs.len(),
        successes: its.len(),
        pe1: mean(&its),
        pe1_sd: sample_sd(&its),
        failure_rate: percent(runs.len() - its.len(), runs.len()),
    }
}

/// Failed runs counted by the category of their last failing iteration.
pub fn failure_histogram(records: &[RunRecord]) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for label in scored(records).filter_map(RunRecord::failure_label) {
        *h.entry(label).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub runs: usize,
    pub infrastructure_failures: usize,
    pub reliability: Reliability,
    pub design_quality: DesignQuality,
    pub process_efficiency: ProcessEfficiency,
    pub failures: BTreeMap<String, usize>,
}

pub fn summarize_model(model_id: &str, records: &[RunRecord]) -> ModelSummary {
    ModelSummary {
        model_id: model_id.to_string(),
        runs: records.len(),
        infrastructure_failures: records.iter().filter(|r| r.is_infrastructure()).count(),
        reliability: reliability(records),
        design_quality: design_quality(records),
        process_efficiency: process_efficiency(records),
        failures: failure_histogram(records),
    }
}

/// One summary per model id, ordered by id.
pub fn summarize(records: &[RunRecord]) -> Vec<ModelSummary> {
    let mut groups: BTreeMap<&str, Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.model_id).or_default().push(r.clone());
    }
    groups.iter().map(|(id, rs)| summarize_model(id, rs)).collect()
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

fn pm(m: Option<f64>, sd: Option<f64>, digits: usize) -> String {
    match (m, sd) {
        (Some(m), Some(s)) => format!("{m:.digits$} ± {s:.digits$}"),
        (Some(m), None) => format!("{m:.digits$}"),
        _ => "-".to_string(),
    }
}

/// Aligned-text tables of the reliability, design-quality and efficiency
/// metrics plus the failure histogram.
pub fn render_text_report(summaries: &[ModelSummary]) -> String {
    let w = summaries.iter().map(|s| s.model_id.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "Reliability (%; R2, R3 conditional on the previous stage)");
    let _ = writeln!(
        out,
        "{:w$}  {:>6}  {:>6}  {:>6}  {:>8}  {:>8}  {:>6}",
        "model", "R1", "R2", "R3", "R2 uncond", "R3 uncond", "iters"
    );
    for s in summaries {
        let r = &s.reliability;
        let _ = writeln!(
            out,
            "{:w$}  {:>6}  {:>6}  {:>6}  {:>8}  {:>8}  {:>6}",
            s.model_id,
            cell(r.r1, 1),
            cell(r.r2, 1),
            cell(r.r3, 1),
            cell(r.r2_unconditional, 1),
            cell(r.r3_unconditional, 1),
            r.iterations
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Design quality (final designs; DQ2 in SF/cm³)");
    let _ = writeln!(
        out,
        "{:w$}  {:>15}  {:>8}  {:>6}  {:>6}  {:>15}  {:>4}",
        "model", "DQ1 SF", "DQ2", "DQ3", "DQ4 %", "DQ5 %", "n"
    );
    for s in summaries {
        let d = &s.design_quality;
        let _ = writeln!(
            out,
            "{:w$}  {:>15}  {:>8}  {:>6}  {:>6}  {:>15}  {:>4}",
            s.model_id,
            pm(d.dq1_mean, d.dq1_sd, 2),
            cell(d.dq2, 4),
            cell(d.dq3, 1),
            cell(d.dq4, 1),
            pm(d.dq5_mean, d.dq5_sd, 2),
            d.designs
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Process efficiency");
    let _ = writeln!(
        out,
        "{:w$}  {:>12}  {:>9}  {:>6}  {:>6}",
        "model", "PE1", "fail %", "runs", "infra"
    );
    for s in summaries {
        let p = &s.process_efficiency;
        let _ = writeln!(
            out,
            "{:w$}  {:>12}  {:>9}  {:>6}  {:>6}",
            s.model_id,
            pm(p.pe1, p.pe1_sd, 2),
            cell(p.failure_rate, 1),
            p.runs,
            s.infrastructure_failures
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Failure types (runs)");
    for s in summaries {
        let total: usize = s.failures.values().sum();
        let _ = writeln!(out, "{} ({total} failed)", s.model_id);
        for (label, n) in &s.failures {
            let _ = writeln!(out, "  {label:<16} {n:>5}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn it(k: usize, stages: u8) -> IterationRecord {
        let mut r = IterationRecord::compile_failure(k);
        r.compile_ok = stages >= 1;
        r.mesh_ok = stages >= 2;
        r.fea_ok = stages >= 3;
        r.failure_category = match stages {
            0 => Some(FailureCategory::Compile),
            1 => Some(FailureCategory::Mesh),
            2 => Some(FailureCategory::Fea),
            _ => None,
        };
        r
    }

    fn solved(k: usize, sf: f64, volume: f64, accepted: bool) -> IterationRecord {
        let mut r = it(k, 3);
        r.safety_factor = Some(sf);
        r.volume_mm3 = Some(volume);
        r.face_count = Some(6);
        r.accepted = accepted;
        r
    }

    fn run(iterations: Vec<IterationRecord>) -> RunRecord {
        let mut r = RunRecord::new("m", "p", VariantSpec::IDENTITY, 0, RunMode::Heuristic);
        for i in iterations {
            r.push(i);
        }
        r.close();
        r
    }

    #[test]
    fn reliability_all_success() {
        let r = run((1..=10).map(|k| solved(k, 9.0, 1.0, false)).collect());
        let rel = reliability(&[r]);
        assert_eq!((rel.r1, rel.r2, rel.r3), (Some(100.0), Some(100.0), Some(100.0)));
    }

    #[test]
    fn reliability_conditional_rates() {
        let mut its = vec![it(1, 0)];
        its.extend((2..=4).map(|k| it(k, 1)));
        its.extend((5..=7).map(|k| it(k, 2)));
        its.extend((8..=10).map(|k| it(k, 3)));
        let rel = reliability(&[run(its)]);
        assert_eq!(rel.r1, Some(90.0));
        assert!((rel.r2.unwrap() - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(rel.r3, Some(50.0));
        assert_eq!(rel.r2_unconditional, Some(60.0));
        assert_eq!(rel.r3_unconditional, Some(30.0));
    }

    #[test]
    fn reliability_undefined_stages_absent() {
        let rel = reliability(&[run(vec![it(1, 0), it(2, 0)])]);
        assert_eq!(rel.r1, Some(0.0));
        assert_eq!((rel.r2, rel.r3), (None, None));
    }

    #[test]
    fn design_quality_definitions() {
        let one = run(vec![solved(1, 4.0, 200_000.0, true)]);
        let dq = design_quality(std::slice::from_ref(&one));
        assert!((dq.dq2.unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(dq.dq1_mean, Some(4.0));
        assert_eq!(dq.dq1_sd, None);

        let mut a = solved(1, 3.0, 1000.0, false);
        a.design_space_violated = true;
        a.violation_ratio = 0.004;
        let b = solved(1, 3.0, 1000.0, true);
        let dq = design_quality(&[run(vec![a]), run(vec![b])]);
        assert_eq!(dq.dq4, Some(50.0));
        assert!((dq.dq5_mean.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(dq.dq3, Some(6.0));
    }

    #[test]
    fn design_quality_uses_final_iteration_only() {
        let r = run(vec![solved(1, 100.0, 10.0, false), it(2, 1)]);
        assert_eq!(design_quality(&[r]).designs, 0);
    }

    #[test]
    fn process_efficiency_examples() {
        let three = run((1..=3).map(|k| solved(k, 3.0, 1.0, k == 3)).collect());
        let five = run((1..=5).map(|k| solved(k, 3.0, 1.0, k == 5)).collect());
        let cap = run((1..=10).map(|k| it(k, 0)).collect());
        let pe = process_efficiency(&[three.clone(), five, cap.clone()]);
        assert_eq!(pe.pe1, Some(4.0));
        assert!((pe.failure_rate.unwrap() - 100.0 / 3.0).abs() < 1e-12);
        let none = process_efficiency(std::slice::from_ref(&cap));
        assert_eq!((none.pe1, none.failure_rate), (None, Some(100.0)));
        let single = run(vec![solved(1, 3.0, 1.0, true)]);
        assert_eq!(process_efficiency(&[single]).pe1, Some(1.0));
        assert_eq!(cap.final_status, FinalStatus::IterationCap);
        assert_eq!(three.iterations_to_valid, Some(3));
    }

    #[test]
    fn histogram_conserves_failed_runs() {
        let runs = vec![
            run(vec![it(1, 0)]),
            run(vec![it(1, 2)]),
            run(vec![solved(1, 9.0, 1.0, false)]),
            run(vec![solved(1, 3.0, 1.0, true)]),
        ];
        let h = failure_histogram(&runs);
        assert_eq!(h.values().sum::<usize>(), 3);
        assert_eq!(h["Compile"], 1);
        assert_eq!(h["FEA"], 1);
        assert_eq!(h[OUT_OF_RANGE_LABEL], 1);
    }

    #[test]
    fn infrastructure_runs_are_excluded() {
        let mut infra = run(vec![it(1, 0)]);
        infra.final_status = FinalStatus::Infrastructure;
        let ok = run(vec![solved(1, 3.0, 1.0, true)]);
        let s = summarize_model("m", &[infra, ok]);
        assert_eq!(s.infrastructure_failures, 1);
        assert_eq!(s.reliability.r1, Some(100.0));
        assert_eq!(s.process_efficiency.failure_rate, Some(0.0));
        assert!(s.failures.is_empty());
    }

    #[test]
    fn token_totals_accumulate() {
        let mut a = it(1, 0);
        a.input_tokens = 10;
        a.output_tokens = 3;
        let mut b = it(2, 0);
        b.input_tokens = 5;
        b.output_tokens = 4;
        let r = run(vec![a, b]);
        assert_eq!((r.input_tokens, r.output_tokens), (15, 7));
    }

    #[test]
    fn record_json_round_trip() {
        let r = run(vec![it(1, 0), solved(2, 3.0, 5.0, true)]);
        let text = serde_json::to_string(&r).unwrap();
        let back: RunRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(text.contains("\"final_status\":{\"status\":\"valid\"}"));
    }

    #[test]
    fn text_report_lists_every_model() {
        let mut a = run(vec![solved(1, 3.0, 1.0, true)]);
        a.model_id = "alpha".into();
        let mut b = run(vec![it(1, 0)]);
        b.model_id = "beta".into();
        let text = render_text_report(&summarize(&[b, a]));
        let alpha = text.find("alpha").unwrap();
        let beta = text.find("beta").unwrap();
        assert!(alpha < beta);
        assert!(text.contains("Failure types"));
    }

    fn arb_iteration() -> impl Strategy<Value = IterationRecord> {
        (
            0u8..4,
            0.5f64..20.0,
            1.0f64..1e6,
            any::<bool>(),
            0.0f64..0.5,
            any::<bool>(),
        )
            .prop_map(|(stages, sf, vol, viol, ratio, acc)| {
                let mut r = it(1, stages);
                if stages == 3 {
                    r.safety_factor = Some(sf);
                    r.volume_mm3 = Some(vol);
                    r.face_count = Some(6);
                    r.accepted = acc;
                }
                r.design_space_violated = viol;
                r.violation_ratio = if viol { ratio } else { 0.0 };
                r
            })
    }

    fn arb_records() -> impl Strategy<Value = Vec<RunRecord>> {
        prop::collection::vec(prop::collection::vec(arb_iteration(), 1..6), 1..12).prop_map(|runs| {
            runs.into_iter()
                .map(|mut its| {
                    for (k, i) in its.iter_mut().enumerate() {
                        i.iteration_index = k + 1;
                    }
                    run(its)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn funnel_is_monotone(records in arb_records()) {
            let r = reliability(&records);
            let r1 = r.r1.unwrap();
            let r2 = r.r2_unconditional.unwrap();
            let r3 = r.r3_unconditional.unwrap();
            prop_assert!(r1 >= r2 && r2 >= r3);
        }

        #[test]
        fn aggregation_is_order_invariant(records in arb_records(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(summarize(&records), summarize(&shuffled));
        }
    }
}
