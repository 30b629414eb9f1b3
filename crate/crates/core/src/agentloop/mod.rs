//! The Generate-Simulate-Refine loop: Planner, CAD Engineer, Geometry
//! Reviewer and Structural Reviewer around the deterministic evaluation
//! pipeline.
//!
//! Routing: compile and geometry failures go back to the Engineer; after
//! [`LoopConfig::replan_after`] consecutive geometry failures the Planner
//! replans; a structural rejection goes to the Planner. Deterministic check
//! results always decide pass or fail; model text is advisory.

pub mod artifacts;
pub mod backend;
pub mod feedback;
pub mod heuristic;
pub mod prompts;
pub mod remote;

use std::path::PathBuf;
use std::time::Instant;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::fem::{FemResult, Hotspot};
use crate::geometry::{GeometryProgram, SurfaceMesh};
use crate::loadcase::{example_case, LoadCase, VariantSpec};
use crate::metrics::{FinalStatus, IterationRecord, RunMode, RunRecord};
use crate::render::{encode_png, render_review_views, render_view, Image, ViewDirection, ViewSpec};
use crate::validators::{evaluate_program, Evaluation, FailureCategory, PipelineConfig, ValidationReport};

use artifacts::RunDir;
pub use backend::{
    chat_with_retry, AgentBackend, AgentRole, BackendError, BackendUnavailable, ChatRequest, ChatResponse, ImageData,
    Message, Part, RetryPolicy, Scripted, ScriptedBackend, DEFAULT_MAX_OUTPUT_TOKENS, DEFAULT_TEMPERATURE,
};
pub use heuristic::run_heuristic;
use prompts::{extract_program, feedback_block, fill, ExtractionError};

pub const DEFAULT_MAX_ITERATIONS: usize = 10;
/// Consecutive geometry failures on one plan before the Planner replans.
pub const DEFAULT_REPLAN_AFTER: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub pipeline: PipelineConfig,
    pub max_iterations: usize,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// When false, FEA still runs for the metrics but its results never
    /// reach a prompt, and the run ends with the first design that passes
    /// the geometry checks.
    pub fea_feedback: bool,
    pub replan_after: usize,
    pub attach_images: bool,
    pub render_size: usize,
    pub retry: RetryPolicy,
    pub disable_thinking: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            pipeline: PipelineConfig::default(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            fea_feedback: true,
            replan_after: DEFAULT_REPLAN_AFTER,
            attach_images: true,
            render_size: crate::render::DEFAULT_VIEW_SIZE,
            retry: RetryPolicy::default(),
            disable_thinking: true,
        }
    }
}

/// Identity of one run within a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub run_index: usize,
    pub run_seed: u64,
    pub variant: VariantSpec,
    /// Run directory for programs, reports, views and the transcript.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunMeta {
    fn default() -> Self {
        RunMeta {
            run_index: 0,
            run_seed: 0,
            variant: VariantSpec::IDENTITY,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub iteration: usize,
    pub role: AgentRole,
    pub prompt: String,
    pub images: usize,
    pub response: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    Compiler,
    GeometryChecks,
    GeometryReviewer,
    Fea,
    StructuralReviewer,
    Orchestrator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub source: FeedbackSource,
    pub target: AgentRole,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Plan,
    Generate,
    Evaluate,
    GeometryReview,
    StructuralReview,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEvent {
    pub iteration: usize,
    pub stage: Stage,
    pub passed: bool,
}

/// Everything the agents share during one run.
#[derive(Debug, Clone)]
pub struct DesignState {
    pub case: LoadCase,
    pub plan: String,
    pub program_source: String,
    pub geometry: Option<GeometryProgram>,
    pub validation: Option<ValidationReport>,
    pub fem: Option<FemResult>,
    pub hotspots: Vec<Hotspot>,
    pub iteration: usize,
    /// Pending feedback, drained by its target role.
    pub feedback: Vec<Feedback>,
    pub transcript: Vec<Exchange>,
    pub trace: Vec<StageEvent>,
}

impl DesignState {
    pub fn new(case: &LoadCase) -> Self {
        DesignState {
            case: case.clone(),
            plan: String::new(),
            program_source: String::new(),
            geometry: None,
            validation: None,
            fem: None,
            hotspots: Vec::new(),
            iteration: 0,
            feedback: Vec::new(),
            transcript: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn send(&mut self, source: FeedbackSource, target: AgentRole, text: impl Into<String>) {
        self.feedback.push(Feedback {
            source,
            target,
            text: text.into(),
        });
    }

    /// Removes and returns the pending feedback for `target`.
    pub fn take_feedback(&mut self, target: AgentRole) -> Vec<String> {
        let (mine, rest): (Vec<Feedback>, Vec<Feedback>) = self.feedback.drain(..).partition(|f| f.target == target);
        self.feedback = rest;
        mine.into_iter().map(|f| f.text).collect()
    }

    fn mark(&mut self, stage: Stage, passed: bool) {
        self.trace.push(StageEvent {
            iteration: self.iteration,
            stage,
            passed,
        });
    }

    fn absorb(&mut self, eval: &Evaluation) {
        self.validation = Some(eval.report.clone());
        self.fem = eval.fem.clone();
        self.hotspots = eval.hotspots.clone();
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub state: DesignState,
}

fn png_part(img: &Image) -> Part {
    Part::Image {
        image: ImageData {
            media_type: "image/png".into(),
            base64: base64::engine::general_purpose::STANDARD.encode(encode_png(img)),
        },
    }
}

/// Per-run call context: backend, settings and the running token count of
/// the current iteration.
struct Session<'a> {
    backend: &'a dyn AgentBackend,
    config: &'a LoopConfig,
    system: String,
    tokens: (u64, u64),
    dir: Option<RunDir>,
    io_error: Option<String>,
}

impl<'a> Session<'a> {
    fn new(backend: &'a dyn AgentBackend, config: &'a LoopConfig, meta: &RunMeta) -> Self {
        let mut io_error = None;
        let dir = meta.out_dir.as_ref().and_then(|p| match RunDir::create(p) {
            Ok(d) => Some(d),
            Err(e) => {
                io_error = Some(e.to_string());
                None
            }
        });
        Session {
            backend,
            config,
            system: prompts::system_prompt(&config.pipeline.material, config.pipeline.sf_range),
            tokens: (0, 0),
            dir,
            io_error,
        }
    }

    fn ask(
        &mut self,
        state: &mut DesignState,
        role: AgentRole,
        parts: Vec<Part>,
    ) -> Result<String, BackendUnavailable> {
        let mut req = ChatRequest::new(
            self.backend.model_id(),
            role,
            vec![Message::system(self.system.clone()), Message::user(parts)],
        );
        req.temperature = self.config.temperature;
        req.max_output_tokens = self.config.max_output_tokens;
        req.disable_thinking = self.config.disable_thinking;
        let resp = chat_with_retry(self.backend, &req, &self.config.retry)?;
        self.tokens.0 += resp.input_tokens;
        self.tokens.1 += resp.output_tokens;
        state.transcript.push(Exchange {
            iteration: state.iteration,
            role,
            prompt: req.text(),
            images: req.image_count(),
            response: resp.text.clone(),
            input_tokens: resp.input_tokens,
            output_tokens: resp.output_tokens,
        });
        Ok(resp.text)
    }

    fn note_io<T>(&mut self, r: std::io::Result<T>) {
        if let Err(e) = r {
            self.io_error.get_or_insert(e.to_string());
        }
    }

    fn views(&mut self, k: usize, surface: Option<&SurfaceMesh>, case: &LoadCase) -> Vec<(ViewDirection, Image)> {
        if !self.config.attach_images && self.dir.is_none() {
            return Vec::new();
        }
        let empty = SurfaceMesh::default();
        let views = render_review_views(surface.unwrap_or(&empty), case, self.config.render_size);
        if let Some(d) = self.dir.clone() {
            let r = d.write_views(k, &views);
            self.note_io(r);
        }
        views
    }

    fn image_parts(&self, views: &[(ViewDirection, Image)]) -> Vec<Part> {
        if self.config.attach_images {
            views.iter().map(|(_, img)| png_part(img)).collect()
        } else {
            Vec::new()
        }
    }

    fn save(&mut self, k: usize, source: &str, report: Option<&ValidationReport>) {
        if let Some(d) = self.dir.clone() {
            let r = d.write_program(k, source);
            self.note_io(r);
            if let Some(rep) = report {
                let r = d.write_validation(k, rep);
                self.note_io(r);
            }
        }
    }
}

fn case_json(case: &LoadCase) -> String {
    case.to_json_pretty()
}

/// Asks the Planner for a plan. The prompt carries the load case, one
/// rendered view of the design space and a disjoint worked example.
pub fn planner_step(
    state: &mut DesignState,
    backend: &dyn AgentBackend,
    config: &LoopConfig,
) -> Result<String, BackendUnavailable> {
    let mut s = Session::new(backend, config, &RunMeta::default());
    planner(state, &mut s)
}

fn planner(state: &mut DesignState, s: &mut Session) -> Result<String, BackendUnavailable> {
    let feedback = state.take_feedback(AgentRole::Planner);
    let text = fill(
        prompts::PLANNER,
        &[
            ("case_json", &case_json(&state.case)),
            ("example_case", &case_json(&example_case())),
            ("example_plan", prompts::EXAMPLE_PLAN),
            ("feedback", &feedback_block(&feedback)),
        ],
    );
    let mut parts = vec![Part::Text { text }];
    if s.config.attach_images {
        let size = s.config.render_size;
        let img = render_view(
            &SurfaceMesh::default(),
            &state.case,
            &ViewSpec::new(ViewDirection::Isometric).with_size(size, size),
        );
        parts.push(png_part(&img));
    }
    let plan = s.ask(state, AgentRole::Planner, parts)?;
    state.plan = plan.clone();
    state.mark(Stage::Plan, true);
    Ok(plan)
}

/// Asks the Engineer for a program and extracts it. Pending Engineer
/// feedback is included in the prompt and cleared.
pub fn engineer_step(
    state: &mut DesignState,
    backend: &dyn AgentBackend,
    config: &LoopConfig,
) -> Result<Result<GeometryProgram, ExtractionError>, BackendUnavailable> {
    let mut s = Session::new(backend, config, &RunMeta::default());
    engineer(state, &mut s)
}

fn engineer(
    state: &mut DesignState,
    s: &mut Session,
) -> Result<Result<GeometryProgram, ExtractionError>, BackendUnavailable> {
    let feedback = state.take_feedback(AgentRole::Engineer);
    let text = fill(
        prompts::ENGINEER,
        &[
            ("dsl", prompts::DSL),
            ("case_json", &case_json(&state.case)),
            ("plan", &state.plan),
            ("example_program", prompts::EXAMPLE_PROGRAM),
            ("feedback", &feedback_block(&feedback)),
        ],
    );
    let response = s.ask(state, AgentRole::Engineer, vec![Part::Text { text }])?;
    Ok(take_program(state, &response))
}

fn take_program(state: &mut DesignState, response: &str) -> Result<GeometryProgram, ExtractionError> {
    let result = extract_program(response);
    match &result {
        Ok((p, src)) => {
            state.program_source = src.clone();
            state.geometry = Some(p.clone());
        }
        Err(_) => {
            state.program_source = response.to_string();
            state.geometry = None;
        }
    }
    state.mark(Stage::Generate, result.is_ok());
    result.map(|(p, _)| p)
}

/// Parses a reviewer's closing `VERDICT: PASS|FAIL` line; a missing verdict
/// counts as a pass.
pub fn reviewer_verdict(text: &str) -> bool {
    match text.rfind("VERDICT:") {
        Some(i) => !text[i + 8..].trim_start().to_ascii_uppercase().starts_with("FAIL"),
        None => true,
    }
}

/// Geometry review: `None` on pass, feedback for the Engineer on failure.
/// Failing deterministic checks fail the review whatever the model says.
fn geometry_review(
    state: &mut DesignState,
    s: &mut Session,
    eval: &Evaluation,
) -> Result<Option<String>, BackendUnavailable> {
    let report = &eval.report;
    let failures = feedback::geometry_failures(report, &state.case);
    let views = s.views(state.iteration, eval.surface.as_ref(), &state.case);
    let text = fill(
        prompts::GEOMETRY_REVIEWER,
        &[
            ("plan", &state.plan),
            ("program", &state.program_source),
            ("checks", &feedback::geometry_checks(report, &state.case)),
        ],
    );
    let mut parts = vec![Part::Text { text }];
    parts.extend(s.image_parts(&views));
    let response = s.ask(state, AgentRole::GeometryReviewer, parts)?;
    let model_pass = reviewer_verdict(&response);
    let outcome = if !failures.is_empty() {
        Some(format!("{}\nReviewer notes: {}", failures.join("\n"), response.trim()))
    } else if !model_pass {
        Some(format!("Geometry reviewer: {}", response.trim()))
    } else {
        None
    };
    state.mark(Stage::GeometryReview, outcome.is_none());
    Ok(outcome)
}

/// Structural review: accepts exactly when the safety factor is in range;
/// otherwise returns feedback for the Planner.
fn structural_review(
    state: &mut DesignState,
    s: &mut Session,
    eval: &Evaluation,
) -> Result<Option<String>, BackendUnavailable> {
    let sf_range = s.config.pipeline.sf_range;
    let results = feedback::structural_results(&eval.report, &eval.hotspots, sf_range);
    let text = fill(
        prompts::STRUCTURAL_REVIEWER,
        &[
            ("sf_min", &sf_range.0.to_string()),
            ("sf_max", &sf_range.1.to_string()),
            ("plan", &state.plan),
            ("results", &results),
        ],
    );
    let response = s.ask(state, AgentRole::StructuralReviewer, vec![Part::Text { text }])?;
    let accepted = eval.report.accepted();
    state.mark(Stage::StructuralReview, accepted);
    Ok((!accepted).then(|| format!("{results}\nStructural reviewer: {}", response.trim())))
}

/// What one iteration decided.
enum Step {
    Continue,
    Accepted,
    /// FEA feedback disabled and the geometry passed: the run ends here.
    Final,
}

fn iteration_record(
    k: usize,
    eval: Option<&Evaluation>,
    accepted: bool,
    s: &Session,
    started: Instant,
) -> IterationRecord {
    let mut it = match eval {
        Some(e) => IterationRecord::from_report(k, &e.report),
        None => IterationRecord::compile_failure(k),
    };
    it.accepted = accepted;
    it.input_tokens = s.tokens.0;
    it.output_tokens = s.tokens.1;
    it.wall_seconds = started.elapsed().as_secs_f64();
    it
}

fn finish(record: &mut RunRecord, step: &Step, started: Instant) {
    record.close();
    if let (Step::Final, false) = (step, record.is_valid()) {
        let last = record.iterations.last();
        record.final_status = if last.is_some_and(|i| i.fea_ok) {
            FinalStatus::OutOfRange
        } else {
            FinalStatus::Failed(last.and_then(|i| i.failure_category).unwrap_or(FailureCategory::Fea))
        };
    }
    record.wall_seconds = started.elapsed().as_secs_f64();
}

fn abort(record: &mut RunRecord, s: &Session, e: &BackendUnavailable, started: Instant) {
    // tokens of the unfinished iteration still count
    record.input_tokens += s.tokens.0;
    record.output_tokens += s.tokens.1;
    record.final_status = FinalStatus::Infrastructure;
    record.error = Some(e.to_string());
    record.wall_seconds = started.elapsed().as_secs_f64();
}

fn new_record(
    case: &LoadCase,
    backend: &dyn AgentBackend,
    config: &LoopConfig,
    meta: &RunMeta,
    mode: RunMode,
) -> RunRecord {
    let mut r = RunRecord::new(backend.model_id(), &case.problem_id, meta.variant, meta.run_index, mode);
    r.run_seed = meta.run_seed;
    r.fea_feedback = config.fea_feedback;
    r
}

fn wrap_up(mut record: RunRecord, state: DesignState, mut s: Session) -> RunOutcome {
    if let Some(d) = s.dir.clone() {
        let r = d.write_transcript(&state.transcript);
        s.note_io(r);
    }
    if record.error.is_none() {
        record.error = s.io_error.take().map(|e| format!("artifact write failed: {e}"));
    }
    RunOutcome { record, state }
}

/// Runs the four-agent loop until a design is accepted or the iteration cap
/// is reached.
pub fn run_pipeline(case: &LoadCase, backend: &dyn AgentBackend, config: &LoopConfig, meta: &RunMeta) -> RunOutcome {
    let started = Instant::now();
    let mut state = DesignState::new(case);
    let mut record = new_record(case, backend, config, meta, RunMode::MultiAgent);
    let mut s = Session::new(backend, config, meta);
    let mut need_plan = true;
    let mut geometry_failures = 0;
    let mut step = Step::Continue;
    for k in 1..=config.max_iterations {
        state.iteration = k;
        s.tokens = (0, 0);
        let iter_start = Instant::now();
        let result = multi_agent_iteration(&mut state, &mut s, &mut need_plan, &mut geometry_failures);
        let (eval, next) = match result {
            Ok(v) => v,
            Err(e) => {
                abort(&mut record, &s, &e, started);
                return wrap_up(record, state, s);
            }
        };
        step = next;
        let accepted = matches!(step, Step::Accepted)
            || (matches!(step, Step::Final) && eval.as_ref().is_some_and(|e| e.report.accepted()));
        record.push(iteration_record(k, eval.as_ref(), accepted, &s, iter_start));
        if !matches!(step, Step::Continue) {
            break;
        }
    }
    finish(&mut record, &step, started);
    wrap_up(record, state, s)
}

fn multi_agent_iteration(
    state: &mut DesignState,
    s: &mut Session,
    need_plan: &mut bool,
    geometry_failures: &mut usize,
) -> Result<(Option<Evaluation>, Step), BackendUnavailable> {
    let k = state.iteration;
    if *need_plan {
        planner(state, s)?;
        *need_plan = false;
        *geometry_failures = 0;
    }
    let program = engineer(state, s)?;
    let mut eval = None;
    let mut step = Step::Continue;
    let engineer_issue = match program {
        Err(e) => {
            s.save(k, &state.program_source.clone(), None);
            Some((FeedbackSource::Compiler, feedback::compile_feedback(&e.to_string())))
        }
        Ok(program) => {
            let ev = evaluate_program(&program, &state.case, &s.config.pipeline);
            state.absorb(&ev);
            s.save(k, &state.program_source.clone(), Some(&ev.report));
            state.mark(Stage::Evaluate, ev.report.compile_ok);
            let issue = if !ev.report.compile_ok {
                let msg = ev.report.compile_error.clone().unwrap_or_default();
                Some((FeedbackSource::Compiler, feedback::compile_feedback(&msg)))
            } else if let Some(fb) = geometry_review(state, s, &ev)? {
                Some((FeedbackSource::GeometryChecks, fb))
            } else if !s.config.fea_feedback {
                step = Step::Final;
                None
            } else if !ev.report.fea_ok() {
                let msg = feedback::structural_results(&ev.report, &[], s.config.pipeline.sf_range);
                Some((FeedbackSource::Fea, msg))
            } else {
                if let Some(fb) = structural_review(state, s, &ev)? {
                    state.send(FeedbackSource::StructuralReviewer, AgentRole::Planner, fb);
                    *need_plan = true;
                } else {
                    step = Step::Accepted;
                }
                *geometry_failures = 0;
                None
            };
            eval = Some(ev);
            issue
        }
    };
    if let Some((source, text)) = engineer_issue {
        *geometry_failures += 1;
        if *geometry_failures >= s.config.replan_after {
            state.send(
                FeedbackSource::Orchestrator,
                AgentRole::Planner,
                format!(
                    "The engineer failed {} times in a row on the current plan. Latest issue: {text}",
                    *geometry_failures
                ),
            );
            *need_plan = true;
        }
        state.send(source, AgentRole::Engineer, text);
    } else if matches!(step, Step::Final) {
        *geometry_failures = 0;
    }
    Ok((eval, step))
}

/// Raw tool output for the single-agent Engineer.
fn raw_tool_feedback(eval: &Evaluation, fea_feedback: bool) -> String {
    let mut report = eval.report.clone();
    if !fea_feedback {
        report.fea = None;
        if report.failure() == Some(FailureCategory::Fea) {
            report.verdict = crate::validators::Verdict::Valid;
        }
    }
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    if fea_feedback && !eval.hotspots.is_empty() {
        text.push_str("\nhotspots: ");
        text.push_str(&serde_json::to_string(&eval.hotspots).expect("hotspots serialize"));
    }
    text
}

/// One Engineer with direct access to the tools: no Planner and no reviewer
/// calls. Tool output is passed back raw.
pub fn single_agent_pipeline(
    case: &LoadCase,
    backend: &dyn AgentBackend,
    config: &LoopConfig,
    meta: &RunMeta,
) -> RunOutcome {
    let started = Instant::now();
    let mut state = DesignState::new(case);
    let mut record = new_record(case, backend, config, meta, RunMode::SingleAgent);
    let mut s = Session::new(backend, config, meta);
    let mut step = Step::Continue;
    let mut last_views: Vec<(ViewDirection, Image)> = Vec::new();
    for k in 1..=config.max_iterations {
        state.iteration = k;
        s.tokens = (0, 0);
        let iter_start = Instant::now();
        let feedback = state.take_feedback(AgentRole::Engineer);
        let text = fill(
            prompts::SINGLE_ENGINEER,
            &[
                ("dsl", prompts::DSL),
                ("case_json", &case_json(case)),
                ("example_case", &case_json(&example_case())),
                ("example_program", prompts::EXAMPLE_PROGRAM),
                ("feedback", &feedback_block(&feedback)),
            ],
        );
        let mut parts = vec![Part::Text { text }];
        parts.extend(s.image_parts(&last_views));
        let response = match s.ask(&mut state, AgentRole::Engineer, parts) {
            Ok(r) => r,
            Err(e) => {
                abort(&mut record, &s, &e, started);
                return wrap_up(record, state, s);
            }
        };
        let mut eval = None;
        let mut accepted = false;
        match take_program(&mut state, &response) {
            Err(e) => {
                s.save(k, &state.program_source.clone(), None);
                state.send(
                    FeedbackSource::Compiler,
                    AgentRole::Engineer,
                    feedback::compile_feedback(&e.to_string()),
                );
                last_views.clear();
            }
            Ok(program) => {
                let ev = evaluate_program(&program, case, &config.pipeline);
                state.absorb(&ev);
                s.save(k, &state.program_source.clone(), Some(&ev.report));
                state.mark(Stage::Evaluate, ev.report.compile_ok);
                last_views = s.views(k, ev.surface.as_ref(), case);
                let geometry_ok =
                    ev.report.compile_ok && !ev.report.failure().is_some_and(feedback::is_geometry_failure);
                if config.fea_feedback {
                    accepted = ev.report.accepted();
                    if accepted {
                        step = Step::Accepted;
                    }
                } else if geometry_ok {
                    accepted = ev.report.accepted();
                    step = Step::Final;
                }
                if matches!(step, Step::Continue) {
                    state.send(
                        FeedbackSource::GeometryChecks,
                        AgentRole::Engineer,
                        raw_tool_feedback(&ev, config.fea_feedback),
                    );
                }
                eval = Some(ev);
            }
        }
        record.push(iteration_record(k, eval.as_ref(), accepted, &s, iter_start));
        if !matches!(step, Step::Continue) {
            break;
        }
    }
    finish(&mut record, &step, started);
    wrap_up(record, state, s)
}

#[cfg(test)]
mod tests;
