use std::sync::OnceLock;

use super::*;
use crate::aabb::Aabb;
use crate::loadcase::{LoadCaseBuilder, LoadKind};
use crate::metrics::{reliability, FinalStatus};
use crate::validators::PipelineConfig;

const VALID: &str = r#"{"op":"box","min":[0,0,0],"max":[100,25,25]}"#;
const OVER: &str = r#"{"op":"box","min":[0,0,0],"max":[100,25,50]}"#;
const UNDER: &str = r#"{"op":"box","min":[0,0,0],"max":[100,25,7]}"#;
const SPLIT: &str = r#"{"op":"union","children":[{"op":"box","min":[0,0,0],"max":[40,25,25]},{"op":"box","min":[60,0,0],"max":[100,25,25]}]}"#;
const PROTRUDING: &str = r#"{"op":"box","min":[0,0,0],"max":[100,25,60]}"#;

fn config() -> LoopConfig {
    LoopConfig {
        pipeline: PipelineConfig {
            resolution: 16,
            ..Default::default()
        },
        render_size: 64,
        retry: RetryPolicy::immediate(3),
        ..Default::default()
    }
}

fn case_with_force(newtons: f64) -> LoadCase {
    LoadCaseBuilder::new(
        "TEST_CANTILEVER",
        "test cantilever",
        Aabb::new([0.0; 3], [100.0, 25.0, 50.0]),
    )
    .fixed("wall", Aabb::new([0.0; 3], [0.0, 25.0, 50.0]))
    .load(
        "tip",
        Aabb::new([100.0, 0.0, 0.0], [100.0, 25.0, 50.0]),
        LoadKind::DistributedForce,
        newtons,
        [0.0, 0.0, -1.0],
    )
    .build()
    .unwrap()
}

/// Load case whose `VALID` design has a safety factor of 3.
fn case() -> LoadCase {
    static CASE: OnceLock<LoadCase> = OnceLock::new();
    CASE.get_or_init(|| {
        let probe = case_with_force(1000.0);
        let p = GeometryProgram::from_json(VALID).unwrap();
        let sf = evaluate_program(&p, &probe, &config().pipeline)
            .report
            .safety_factor()
            .unwrap();
        case_with_force(1000.0 * sf / 3.0)
    })
    .clone()
}

fn run(backend: &ScriptedBackend) -> RunOutcome {
    run_pipeline(&case(), backend, &config(), &RunMeta::default())
}

fn stages(state: &DesignState) -> Vec<(usize, Stage, bool)> {
    state.trace.iter().map(|e| (e.iteration, e.stage, e.passed)).collect()
}

#[test]
fn calibrated_designs_land_in_their_bands() {
    let c = case();
    let sf = |src: &str| {
        evaluate_program(&GeometryProgram::from_json(src).unwrap(), &c, &config().pipeline)
            .report
            .safety_factor()
            .unwrap()
    };
    assert!((sf(VALID) - 3.0).abs() < 1e-3);
    assert!(sf(OVER) > 5.0);
    assert!(sf(UNDER) < 2.0);
}

#[test]
fn single_shot_success() {
    let b = ScriptedBackend::new("mock")
        .script(AgentRole::Planner, ["PLAN-A"])
        .script(AgentRole::Engineer, [VALID]);
    let out = run(&b);
    assert_eq!(out.record.final_status, FinalStatus::Valid);
    assert_eq!(out.record.iterations_to_valid, Some(1));
    assert_eq!(out.state.plan, "PLAN-A");
    assert_eq!(
        stages(&out.state),
        vec![
            (1, Stage::Plan, true),
            (1, Stage::Generate, true),
            (1, Stage::Evaluate, true),
            (1, Stage::GeometryReview, true),
            (1, Stage::StructuralReview, true),
        ]
    );
    assert_eq!(out.record.model_id, "mock");
    assert_eq!(out.record.mode, RunMode::MultiAgent);
}

#[test]
fn planner_prompt_carries_case_view_and_example() {
    let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, [VALID]);
    run(&b);
    let planner = b
        .requests()
        .into_iter()
        .find(|r| r.agent == AgentRole::Planner)
        .unwrap();
    let text = planner.text();
    assert!(text.contains(&case().to_json_pretty()));
    assert!(text.contains("EXAMPLE_WALL_HOOK"));
    assert!(!text.contains("FIXED_BEAM_POINT_LOAD"));
    assert_eq!(planner.image_count(), 1);
    assert_eq!(planner.temperature, 0.5);
    assert_eq!(planner.max_output_tokens, 4096);
    let reviewer = b
        .requests()
        .into_iter()
        .find(|r| r.agent == AgentRole::GeometryReviewer)
        .unwrap();
    assert_eq!(reviewer.image_count(), 4);
}

#[test]
fn uncompilable_output_caps_out() {
    let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, ["I cannot write JSON today."]);
    let out = run(&b);
    assert_eq!(out.record.final_status, FinalStatus::IterationCap);
    assert_eq!(out.record.iterations.len(), 10);
    assert_eq!(out.record.failure_category, Some(FailureCategory::Compile));
    assert_eq!(reliability(std::slice::from_ref(&out.record)).r1, Some(0.0));
    // two consecutive geometry failures trigger a replan
    let plans: Vec<usize> = out
        .state
        .trace
        .iter()
        .filter(|e| e.stage == Stage::Plan)
        .map(|e| e.iteration)
        .collect();
    assert_eq!(plans, vec![1, 3, 5, 7, 9]);
    let second_plan = &b.prompts_for(AgentRole::Planner)[1];
    assert!(second_plan.contains("failed 2 times in a row"));
}

#[test]
fn iteration_cap_is_configurable() {
    let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, ["nothing"]);
    let cfg = LoopConfig {
        max_iterations: 3,
        ..config()
    };
    let out = run_pipeline(&case(), &b, &cfg, &RunMeta::default());
    assert_eq!(out.record.iterations.len(), 3);
}

#[test]
fn reviewer_cannot_pass_failing_connectivity() {
    let b = ScriptedBackend::new("mock")
        .script(AgentRole::Engineer, [SPLIT, VALID])
        .script(AgentRole::GeometryReviewer, ["Looks fine to me. VERDICT: PASS"]);
    let out = run(&b);
    assert_eq!(
        out.record.iterations[0].failure_category,
        Some(FailureCategory::Connectivity)
    );
    assert!(!out.record.iterations[0].accepted);
    assert_eq!(
        out.state.trace[3],
        StageEvent {
            iteration: 1,
            stage: Stage::GeometryReview,
            passed: false
        }
    );
    let second = &b.prompts_for(AgentRole::Engineer)[1];
    assert!(second.contains("Connectivity: the material forms 2 separate components"));
    assert!(second.contains("Looks fine to me"));
    assert_eq!(out.record.final_status, FinalStatus::Valid);
    assert_eq!(out.record.iterations_to_valid, Some(2));
}

#[test]
fn design_space_feedback_reports_ratio_and_bounds() {
    let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, [PROTRUDING, VALID]);
    run(&b);
    let second = &b.prompts_for(AgentRole::Engineer)[1];
    assert!(second.contains("Design space: "));
    assert!(second.contains("% of the domain volume"));
    assert!(second.contains("Domain bounds [0, 0, 0] to [100, 25, 50]"));
}

#[test]
fn reviewer_text_reaches_engineer_verbatim() {
    let b = ScriptedBackend::new("mock")
        .script(AgentRole::Engineer, [VALID])
        .script(
            AgentRole::GeometryReviewer,
            ["reduce cross-section\nVERDICT: FAIL", "VERDICT: PASS"],
        );
    let out = run(&b);
    assert!(b.prompts_for(AgentRole::Engineer)[1].contains("reduce cross-section"));
    assert_eq!(out.record.iterations_to_valid, Some(2));
}

#[test]
fn structural_rejection_goes_to_planner() {
    let b = ScriptedBackend::new("mock")
        .script(AgentRole::Planner, ["PLAN-ONE", "PLAN-TWO"])
        .script(AgentRole::Engineer, [OVER, VALID])
        .script(AgentRole::StructuralReviewer, ["remove material from the top"]);
    let out = run(&b);
    let planner = b.prompts_for(AgentRole::Planner);
    assert_eq!(planner.len(), 2);
    assert!(planner[1].contains("over-engineered"));
    assert!(planner[1].contains("stress hotspots"));
    assert!(planner[1].contains("remove material from the top"));
    let engineer = b.prompts_for(AgentRole::Engineer);
    assert!(!engineer[1].contains("over-engineered"));
    assert!(engineer[1].contains("PLAN-TWO"));
    assert_eq!(out.record.final_status, FinalStatus::Valid);
    assert_eq!(out.record.iterations[0].sf_band, Some(crate::validators::SfBand::Over));
}

#[test]
fn under_built_feedback() {
    let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, [UNDER, VALID]);
    run(&b);
    assert!(b.prompts_for(AgentRole::Planner)[1].contains("under-built"));
}

#[test]
fn transcripts_are_isolated_between_runs() {
    let b = ScriptedBackend::new("mock")
        .script(AgentRole::Planner, ["PLAN-RUN-ONE-MARKER", "PLAN-RUN-TWO"])
        .script(AgentRole::Engineer, [SPLIT, VALID, VALID]);
    let first = run(&b);
    let seen = b.requests().len();
    let second = run(&b);
    assert!(first
        .state
        .transcript
        .iter()
        .any(|e| e.prompt.contains("PLAN-RUN-ONE-MARKER")));
    for r in &b.requests()[seen..] {
        assert!(!r.text().contains("PLAN-RUN-ONE-MARKER"));
        assert!(!r.text().contains("separate components"));
    }
    assert!(second.state.transcript.iter().all(|e| e.iteration == 1));
}

#[test]
fn token_totals_match_responses() {
    let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, [SPLIT, OVER, "prose", VALID]);
    let out = run(&b);
    let resp = b.responses();
    assert_eq!(
        out.record.input_tokens,
        resp.iter().map(|r| r.input_tokens).sum::<u64>()
    );
    assert_eq!(
        out.record.output_tokens,
        resp.iter().map(|r| r.output_tokens).sum::<u64>()
    );
    let per_iter: u64 = out.record.iterations.iter().map(|i| i.input_tokens).sum();
    assert_eq!(per_iter, out.record.input_tokens);
    let transcript: u64 = out.state.transcript.iter().map(|e| e.output_tokens).sum();
    assert_eq!(transcript, out.record.output_tokens);
}

#[test]
fn routing_is_deterministic() {
    let script = || {
        ScriptedBackend::new("mock")
            .script(AgentRole::Engineer, [SPLIT, "prose", OVER, UNDER, VALID])
            .script(AgentRole::GeometryReviewer, ["ok VERDICT: PASS"])
    };
    let (b1, b2) = (script(), script());
    let (a, b) = (run(&b1), run(&b2));
    assert_eq!(stages(&a.state), stages(&b.state));
    assert_eq!(a.state.transcript, b.state.transcript);
    assert_eq!(a.record.without_timing(), b.record.without_timing());
    assert_eq!(b1.requests(), b2.requests());
}

#[test]
fn transport_failure_is_infrastructure() {
    let b = ScriptedBackend::new("mock").script(AgentRole::Planner, ["PLAN"]);
    for _ in 0..4 {
        b.push(AgentRole::Engineer, Scripted::TransportError);
    }
    let out = run(&b);
    assert_eq!(out.record.final_status, FinalStatus::Infrastructure);
    assert!(out.record.error.as_deref().unwrap().contains("after 4 attempts"));
    assert!(out.record.iterations.is_empty());
    assert_eq!(out.record.input_tokens, b.responses()[0].input_tokens);
}

#[test]
fn single_agent_uses_one_role() {
    let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, [SPLIT, VALID]);
    let out = single_agent_pipeline(&case(), &b, &config(), &RunMeta::default());
    assert_eq!(out.record.final_status, FinalStatus::Valid);
    assert_eq!(out.record.iterations_to_valid, Some(2));
    assert_eq!(out.record.mode, RunMode::SingleAgent);
    let reqs = b.requests();
    assert!(reqs.iter().all(|r| r.agent == AgentRole::Engineer));
    assert!(reqs[0].text().contains("working alone"));
    assert!(reqs[1].text().contains("\"component_count\": 2"));
    assert_eq!(reqs[1].image_count(), 4);

    let multi = ScriptedBackend::new("mock").script(AgentRole::Engineer, [SPLIT, VALID]);
    run(&multi);
    let engineer_prompt = &multi.prompts_for(AgentRole::Engineer)[0];
    assert_ne!(engineer_prompt, &reqs[0].text());
    assert!(!engineer_prompt.contains("working alone"));
}

#[test]
fn fea_ablation_hides_physics() {
    let cfg = LoopConfig {
        fea_feedback: false,
        ..config()
    };
    let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, [SPLIT, OVER]);
    let out = run_pipeline(&case(), &b, &cfg, &RunMeta::default());
    assert_eq!(out.record.final_status, FinalStatus::OutOfRange);
    assert_eq!(out.record.iterations.len(), 2);
    assert!(out.record.iterations[1].fea_ok);
    assert!(out.record.iterations[1].safety_factor.unwrap() > 5.0);
    for r in b.requests() {
        assert_ne!(r.agent, AgentRole::StructuralReviewer);
        assert!(!r.text().contains("von Mises stress:"));
        assert!(!r.text().contains("hotspots"));
    }

    let single = ScriptedBackend::new("mock").script(AgentRole::Engineer, [SPLIT, VALID]);
    let out = single_agent_pipeline(&case(), &single, &cfg, &RunMeta::default());
    assert_eq!(out.record.final_status, FinalStatus::Valid);
    for r in single.requests() {
        assert!(!r.text().contains("safety_factor\": "));
        assert!(!r.text().contains("max_von_mises"));
    }
}

#[test]
fn run_directory_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let meta = RunMeta {
        out_dir: Some(dir.path().join("run")),
        ..RunMeta::default()
    };
    let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, ["prose", VALID]);
    let out = run_pipeline(&case(), &b, &config(), &meta);
    assert_eq!(out.record.error, None);
    let root = dir.path().join("run");
    assert!(root.join("transcript.json").exists());
    assert!(root.join("iter_1/program.json").exists());
    for f in [
        "program.json",
        "validation.json",
        "view_px.ppm",
        "view_py.ppm",
        "view_pz.ppm",
        "view_iso.ppm",
    ] {
        assert!(root.join("iter_2").join(f).exists(), "{f}");
    }
}

#[test]
fn verdict_parsing() {
    assert!(reviewer_verdict("fine\nVERDICT: PASS"));
    assert!(!reviewer_verdict("VERDICT: PASS then VERDICT: fail"));
    assert!(reviewer_verdict("no verdict here"));
}

#[test]
fn heuristic_converges_on_fixed_beam() {
    let case = crate::loadcase::find_builtin("FIXED_BEAM_POINT_LOAD").unwrap();
    let cfg = LoopConfig::default();
    let a = run_heuristic(&case, &cfg, &RunMeta::default());
    assert_eq!(a.final_status, FinalStatus::Valid, "{a:#?}");
    let sf = a.final_safety_factor.unwrap();
    assert!((2.0..=5.0).contains(&sf));
    let b = run_heuristic(&case, &cfg, &RunMeta::default());
    assert_eq!(a.without_timing(), b.without_timing());
}
