//! Deterministic feedback text built from validator and solver output.

use std::fmt::Write as _;

use crate::aabb::Aabb;
use crate::fem::Hotspot;
use crate::loadcase::LoadCase;
use crate::validators::{FailureCategory, SfBand, ValidationReport};

fn fmt_box(b: &Aabb) -> String {
    format!(
        "[{}, {}, {}] to [{}, {}, {}]",
        b.min[0], b.min[1], b.min[2], b.max[0], b.max[1], b.max[2]
    )
}

/// Whether a failure belongs to the geometry stage.
pub fn is_geometry_failure(c: FailureCategory) -> bool {
    matches!(
        c,
        FailureCategory::DesignSpace
            | FailureCategory::FixArea
            | FailureCategory::LoadArea
            | FailureCategory::Connectivity
            | FailureCategory::Mesh
    )
}

pub fn compile_feedback(error: &str) -> String {
    format!("Compile: the program could not be evaluated: {error}")
}

/// One line per failed geometry check, empty when all pass.
pub fn geometry_failures(report: &ValidationReport, case: &LoadCase) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(d) = report.design_space.filter(|d| d.violated) {
        let mut s = format!(
            "Design space: {:.2}% of the domain volume ({:.0} mm³) lies outside the domain or inside a keep-out region. Domain bounds {}.",
            100.0 * d.violation_ratio,
            d.outside_volume,
            fmt_box(&case.domain)
        );
        for k in &case.keep_out {
            let _ = write!(s, " Keep-out {}.", fmt_box(k));
        }
        out.push(s);
    }
    for id in &report.empty_regions {
        if let Some(sel) = case.selector(id) {
            let kind = if case.support_selectors().iter().any(|s| s.id == *id) {
                "Fix area"
            } else {
                "Load area"
            };
            out.push(format!(
                "{kind}: region '{id}' {} contains no material.",
                fmt_box(&sel.query)
            ));
        }
    }
    if let Some(c) = report.connectivity.filter(|c| !c.all_regions_connected) {
        out.push(format!(
            "Connectivity: the material forms {} separate components; every support and load region must belong to one connected solid.",
            c.component_count
        ));
    }
    if report.meshable == Some(false) {
        out.push("Mesh: no finite elements could be generated from the geometry.".to_string());
    }
    out
}

/// Human-readable results of the deterministic geometry checks.
pub fn geometry_checks(report: &ValidationReport, case: &LoadCase) -> String {
    let failures = geometry_failures(report, case);
    let mut s = String::new();
    if let Some(d) = report.design_space {
        let _ = writeln!(s, "design space violation ratio: {:.4}%", 100.0 * d.violation_ratio);
    }
    if let Some(c) = report.connectivity {
        let _ = writeln!(s, "connected components: {}", c.component_count);
    }
    if let Some(v) = report.volume {
        let _ = writeln!(s, "volume: {v:.0} mm³");
    }
    if failures.is_empty() {
        s.push_str("all geometry checks passed");
    } else {
        s.push_str(&failures.join("\n"));
    }
    s
}

pub fn band_label(band: SfBand) -> &'static str {
    match band {
        SfBand::Under => "under-built (safety factor below the target range)",
        SfBand::Target => "within the target range",
        SfBand::Over => "over-engineered (safety factor above the target range)",
    }
}

/// Safety factor, target range, volume and the top stress hotspots.
pub fn structural_results(report: &ValidationReport, hotspots: &[Hotspot], sf_range: (f64, f64)) -> String {
    let mut s = String::new();
    if let Some(f) = &report.fea {
        if let Some(e) = &f.error {
            let _ = writeln!(s, "FEA failed: {e}");
            return s;
        }
        if let Some(sf) = f.safety_factor {
            let _ = writeln!(s, "safety factor: {sf:.3} (target {} to {})", sf_range.0, sf_range.1);
        }
        if let Some(b) = f.band {
            let _ = writeln!(s, "assessment: {}", band_label(b));
        }
        if let Some(vm) = f.max_von_mises {
            let _ = writeln!(s, "max von Mises stress: {vm:.2} MPa");
        }
    }
    if let Some(v) = report.volume {
        let _ = writeln!(s, "volume: {v:.0} mm³ ({:.2} cm³)", v / 1000.0);
    }
    if !hotspots.is_empty() {
        let _ = writeln!(s, "stress hotspots:");
        for h in hotspots {
            let _ = writeln!(
                s,
                "  {:.2} MPa at ({:.1}, {:.1}, {:.1})",
                h.von_mises, h.centroid[0], h.centroid[1], h.centroid[2]
            );
        }
    }
    s.trim_end().to_string()
}
