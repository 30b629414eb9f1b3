//! Deterministic designer that needs no language model.
//!
//! Iteration 1 proposes the axis-aligned hull of all selector regions,
//! clipped to the domain, with every keep-out region subtracted. Later
//! iterations bisect a thickness parameter `t ∈ (0, 1]` that scales the hull
//! along its width axis: the axis perpendicular to the dominant load
//! direction with the smaller hull extent. SF above the band shrinks `t`,
//! SF below it (or a design too thin to evaluate) grows it.

use std::collections::HashMap;
use std::time::Instant;

use crate::aabb::Aabb;
use crate::geometry::{GeometryProgram, Solid};
use crate::loadcase::LoadCase;
use crate::metrics::{FinalStatus, IterationRecord, RunMode, RunRecord};
use crate::render::render_review_views;
use crate::validators::{evaluate_program, Evaluation, SfBand};

use super::artifacts::RunDir;
use super::feedback::is_geometry_failure;
use super::{LoopConfig, RunMeta};

pub const HEURISTIC_MODEL_ID: &str = "heuristic";

/// Hull of every selector region clipped to the domain. Axes on which the
/// hull is flat take the full domain extent.
pub fn selector_hull(case: &LoadCase) -> Aabb {
    let mut hull = Aabb::empty();
    for s in &case.selectors {
        hull = hull.union(&s.query);
    }
    let mut hull = hull.intersection(&case.domain);
    for a in 0..3 {
        if hull.max[a] - hull.min[a] <= 1e-9 * case.domain.longest_extent() {
            hull.min[a] = case.domain.min[a];
            hull.max[a] = case.domain.max[a];
        }
    }
    hull
}

/// Axis of the largest total-force component.
pub fn load_axis(case: &LoadCase) -> usize {
    let f = case.total_applied_force();
    let mut best = 0;
    for a in 1..3 {
        if f[a].abs() > f[best].abs() {
            best = a;
        }
    }
    best
}

/// The axis scaled by the thickness parameter.
pub fn width_axis(case: &LoadCase, hull: &Aabb) -> usize {
    let l = load_axis(case);
    let ext = hull.extent();
    let others: Vec<usize> = (0..3).filter(|&a| a != l).collect();
    if ext[others[1]] < ext[others[0]] {
        others[1]
    } else {
        others[0]
    }
}

/// The design at thickness `t`.
pub fn heuristic_program(case: &LoadCase, t: f64) -> GeometryProgram {
    let hull = selector_hull(case);
    let w = width_axis(case, &hull);
    let mut b = hull;
    let c = 0.5 * (hull.min[w] + hull.max[w]);
    let half = 0.5 * t * (hull.max[w] - hull.min[w]);
    b.min[w] = c - half;
    b.max[w] = c + half;
    let body = Solid::Box { min: b.min, max: b.max };
    let root = if case.keep_out.is_empty() {
        body
    } else {
        let mut children = vec![body];
        children.extend(case.keep_out.iter().map(|k| Solid::Box { min: k.min, max: k.max }));
        Solid::Difference { children }
    };
    GeometryProgram::new(root).expect("hull of a valid case is a valid program")
}

/// Runs the bisection designer through the evaluation pipeline.
pub fn run_heuristic(case: &LoadCase, config: &LoopConfig, meta: &RunMeta) -> RunRecord {
    let started = Instant::now();
    let mut record = RunRecord::new(
        HEURISTIC_MODEL_ID,
        &case.problem_id,
        meta.variant,
        meta.run_index,
        RunMode::Heuristic,
    );
    record.run_seed = meta.run_seed;
    record.fea_feedback = config.fea_feedback;
    let dir = meta.out_dir.as_ref().map(|p| RunDir::create(p));
    let mut io_error = None;
    let mut note = |r: std::io::Result<()>| {
        if let Err(e) = r {
            io_error.get_or_insert(e.to_string());
        }
    };
    let dir = match dir {
        Some(Ok(d)) => Some(d),
        Some(Err(e)) => {
            note(Err(e));
            None
        }
        None => None,
    };

    let mut cache: HashMap<u64, Evaluation> = HashMap::new();
    let (mut lo, mut hi, mut t) = (0.0f64, 1.0f64, 1.0f64);
    let mut early_stop = None;
    for k in 1..=config.max_iterations {
        let iter_start = Instant::now();
        let program = heuristic_program(case, t);
        let eval = cache
            .entry(t.to_bits())
            .or_insert_with(|| evaluate_program(&program, case, &config.pipeline));
        let report = &eval.report;
        if let Some(d) = &dir {
            note(d.write_program(k, &program.to_json()));
            note(d.write_validation(k, report));
            if let Some(surface) = &eval.surface {
                note(d.write_views(k, &render_review_views(surface, case, config.render_size)));
            }
        }
        let mut it = IterationRecord::from_report(k, report);
        it.wall_seconds = iter_start.elapsed().as_secs_f64();
        let accepted = it.accepted;
        let failure = report.failure();
        let band = report.fea.as_ref().and_then(|f| f.band);
        record.push(it);
        if accepted {
            break;
        }
        let geometry_failed = !report.compile_ok || failure.is_some_and(is_geometry_failure);
        if t >= 1.0 && (geometry_failed || band.is_none()) {
            // the full hull cannot be fixed by thinning it
            early_stop = failure;
            break;
        }
        match band {
            Some(SfBand::Over) => hi = t,
            _ => lo = t,
        }
        t = 0.5 * (lo + hi);
    }
    record.close();
    if let Some(c) = early_stop {
        record.final_status = FinalStatus::Failed(c);
    }
    record.wall_seconds = started.elapsed().as_secs_f64();
    record.error = io_error.map(|e| format!("artifact write failed: {e}"));
    record
}
