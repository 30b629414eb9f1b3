//! Prompt templates and program extraction.
//!
//! Templates live in `prompts/*.txt` and use `{{name}}` placeholders.

use serde_json::Value;

use crate::fem::Material;
use crate::geometry::GeometryProgram;

pub const SYSTEM: &str = include_str!("../../prompts/system.txt");
pub const PLANNER: &str = include_str!("../../prompts/planner.txt");
pub const ENGINEER: &str = include_str!("../../prompts/engineer.txt");
pub const GEOMETRY_REVIEWER: &str = include_str!("../../prompts/geometry_reviewer.txt");
pub const STRUCTURAL_REVIEWER: &str = include_str!("../../prompts/structural_reviewer.txt");
pub const SINGLE_ENGINEER: &str = include_str!("../../prompts/single_engineer.txt");
pub const DSL: &str = include_str!("../../prompts/dsl.txt");

pub const EXAMPLE_PLAN: &str = "1. One rectangular plate spans from the wall face (x = 0) to the free end (x = 120).\n\
2. Plate cross-section 20 mm wide (full y range) and 24 mm deep, sitting at the bottom of the domain.\n\
3. The wall support and the free-end load region are both covered by the plate ends.";

pub const EXAMPLE_PROGRAM: &str = r#"{"op":"box","min":[0,0,0],"max":[120,20,24]}"#;

/// Replaces every `{{key}}` with its value.
///
/// # Panics
/// If a placeholder is left unfilled.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    if let Some(i) = out.find("{{") {
        let end = out[i..].find("}}").map_or(out.len(), |j| i + j + 2);
        panic!("unfilled placeholder {}", &out[i..end]);
    }
    out
}

pub fn system_prompt(material: &Material, sf_range: (f64, f64)) -> String {
    fill(
        SYSTEM,
        &[
            ("youngs_modulus", &material.youngs_modulus.to_string()),
            ("poisson_ratio", &material.poisson_ratio.to_string()),
            ("yield_strength", &material.yield_strength.to_string()),
            ("sf_min", &sf_range.0.to_string()),
            ("sf_max", &sf_range.1.to_string()),
        ],
    )
}

/// Feedback list, or `none` when empty.
pub fn feedback_block(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_string()
    } else {
        items.iter().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractionError {
    #[error("no JSON object with an \"op\" field found in the response")]
    NoProgram,
    #[error("{0}")]
    Invalid(String),
}

/// The first well-formed JSON object in `text` that has an `op` field.
pub fn extract_program_json(text: &str) -> Option<Value> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(v)) = stream.next() {
            if v.get("op").is_some() {
                return Some(v);
            }
        }
    }
    None
}

/// Extracts and validates the program in an engineer response.
pub fn extract_program(text: &str) -> Result<(GeometryProgram, String), ExtractionError> {
    let value = extract_program_json(text).ok_or(ExtractionError::NoProgram)?;
    let source = value.to_string();
    GeometryProgram::from_value(value)
        .map(|p| (p, source))
        .map_err(|e| ExtractionError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_have_expected_placeholders() {
        for (t, keys) in [
            (PLANNER, &["case_json", "example_case", "example_plan", "feedback"][..]),
            (
                ENGINEER,
                &["dsl", "case_json", "plan", "example_program", "feedback"][..],
            ),
            (GEOMETRY_REVIEWER, &["plan", "program", "checks"][..]),
            (STRUCTURAL_REVIEWER, &["sf_min", "sf_max", "plan", "results"][..]),
            (
                SINGLE_ENGINEER,
                &["dsl", "case_json", "example_case", "example_program", "feedback"][..],
            ),
        ] {
            let values: Vec<(&str, &str)> = keys.iter().map(|k| (*k, "x")).collect();
            let filled = fill(t, &values);
            assert!(!filled.contains("{{"));
        }
    }

    #[test]
    #[should_panic(expected = "unfilled placeholder {{plan}}")]
    fn missing_value_panics() {
        fill("a {{plan}} b", &[]);
    }

    #[test]
    fn example_program_is_valid() {
        let p = GeometryProgram::from_json(EXAMPLE_PROGRAM).unwrap();
        assert_eq!(p.primitive_count(), 1);
    }

    #[test]
    fn extraction_finds_first_program() {
        let text = "Here is the design:\n```json\n{\"op\":\"box\",\"min\":[0,0,0],\"max\":[1,1,1]}\n```\nand {\"op\":\"sphere\"}";
        let (p, src) = extract_program(text).unwrap();
        assert_eq!(p.primitive_count(), 1);
        assert!(src.contains("box"));
    }

    #[test]
    fn prose_only_is_an_extraction_failure() {
        assert_eq!(extract_program("I would use a box."), Err(ExtractionError::NoProgram));
        assert_eq!(extract_program("{\"note\": 1}"), Err(ExtractionError::NoProgram));
        assert!(matches!(
            extract_program("{\"op\":\"box\",\"min\":[0,0,0]}"),
            Err(ExtractionError::Invalid(_))
        ));
    }
}
