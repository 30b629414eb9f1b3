//! Structured load cases: the design domain, spatial selectors, supports and
//! loads that define one structural design problem.
//!
//! The on-disk form is the JSON layout with top-level `meta`,
//! `design_domain`, `spatial_selectors`, `boundary_conditions` and `loads`
//! keys. [`parse_load_case`] validates every invariant and reports a
//! dotted path to the offending field.

mod builtin;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::aabb::Aabb;
use crate::math::{norm, Vec3};

pub use builtin::{builtin_cases, example_case, find_builtin, LoadCaseBuilder};

/// The five geometric scale factors applied to every base case.
pub const GEOM_SCALES: [f64; 5] = [0.5, 0.75, 1.0, 1.5, 2.0];
/// The five force scale factors applied to every base case.
pub const FORCE_SCALES: [f64; 5] = [0.5, 0.75, 1.0, 1.5, 2.0];

const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("schema error at `{path}`: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LengthUnit {
    #[default]
    #[serde(rename = "mm")]
    Millimetre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialSelector {
    pub id: String,
    pub query: Aabb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofLock {
    pub ux: bool,
    pub uy: bool,
    pub uz: bool,
}

impl DofLock {
    pub const ALL: DofLock = DofLock {
        ux: true,
        uy: true,
        uz: true,
    };

    pub fn as_array(&self) -> [bool; 3] {
        [self.ux, self.uy, self.uz]
    }

    pub fn count(&self) -> usize {
        self.as_array().iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    FixedDisplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    #[serde(rename = "spatial_selector_id")]
    pub selector_id: String,
    #[serde(rename = "type")]
    pub kind: BoundaryKind,
    pub dof_lock: DofLock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    DistributedForce,
    PointForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    #[serde(rename = "spatial_selector_id")]
    pub selector_id: String,
    #[serde(rename = "type")]
    pub kind: LoadKind,
    pub magnitude_newtons: f64,
    pub direction: Vec3,
}

impl Load {
    pub fn force_vector(&self) -> Vec3 {
        let m = self.magnitude_newtons;
        [self.direction[0] * m, self.direction[1] * m, self.direction[2] * m]
    }
}

/// A validated load case. Construct through [`parse_load_case`] or
/// [`LoadCase::validated`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LoadCaseDoc", try_from = "LoadCaseDoc")]
pub struct LoadCase {
    pub problem_id: String,
    pub description: String,
    pub units: LengthUnit,
    pub domain: Aabb,
    /// Regions inside `domain` that must stay free of material (bolt
    /// clearances, openings, the missing quadrant of an L-shaped space).
    pub keep_out: Vec<Aabb>,
    pub selectors: Vec<SpatialSelector>,
    pub boundary_conditions: Vec<BoundaryCondition>,
    pub loads: Vec<Load>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub geom_scale: f64,
    pub force_scale: f64,
}

impl VariantSpec {
    pub const IDENTITY: VariantSpec = VariantSpec {
        geom_scale: 1.0,
        force_scale: 1.0,
    };

    pub fn new(geom_scale: f64, force_scale: f64) -> Self {
        assert!(geom_scale > 0.0 && force_scale > 0.0, "variant scales must be positive");
        VariantSpec {
            geom_scale,
            force_scale,
        }
    }

    /// Stable label used in file names and run keys, e.g. `g1.5_f0.75`.
    pub fn label(&self) -> String {
        format!("g{}_f{}", self.geom_scale, self.force_scale)
    }
}

impl fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

// ---------------------------------------------------------------------------
// Wire format

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetaDoc {
    problem_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DomainDoc {
    units: String,
    bounds: Aabb,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    keep_out: Vec<Aabb>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LoadCaseDoc {
    meta: MetaDoc,
    design_domain: DomainDoc,
    spatial_selectors: Vec<SpatialSelector>,
    boundary_conditions: Vec<BoundaryCondition>,
    loads: Vec<Load>,
}

impl From<LoadCase> for LoadCaseDoc {
    fn from(c: LoadCase) -> Self {
        LoadCaseDoc {
            meta: MetaDoc {
                problem_id: c.problem_id,
                description: c.description,
            },
            design_domain: DomainDoc {
                units: "mm".to_string(),
                bounds: c.domain,
                keep_out: c.keep_out,
            },
            spatial_selectors: c.selectors,
            boundary_conditions: c.boundary_conditions,
            loads: c.loads,
        }
    }
}

impl TryFrom<LoadCaseDoc> for LoadCase {
    type Error = SchemaError;

    fn try_from(doc: LoadCaseDoc) -> Result<Self, SchemaError> {
        if doc.design_domain.units != "mm" {
            return Err(SchemaError::new(
                "design_domain.units",
                format!("unsupported unit `{}`, expected `mm`", doc.design_domain.units),
            ));
        }
        LoadCase {
            problem_id: doc.meta.problem_id,
            description: doc.meta.description,
            units: LengthUnit::Millimetre,
            domain: doc.design_domain.bounds,
            keep_out: doc.design_domain.keep_out,
            selectors: doc.spatial_selectors,
            boundary_conditions: doc.boundary_conditions,
            loads: doc.loads,
        }
        .validated()
    }
}

/// Parses and validates a load-case JSON document. Unknown fields are
/// ignored.
pub fn parse_load_case(json_text: &str) -> Result<LoadCase, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(json_text);
    let doc: LoadCaseDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SchemaError::new(path, e.into_inner().to_string())
    })?;
    LoadCase::try_from(doc)
}

impl LoadCase {
    /// Checks every load-case invariant, returning the case unchanged on
    /// success.
    pub fn validated(self) -> Result<Self, SchemaError> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.problem_id.trim().is_empty() {
            return Err(SchemaError::new("meta.problem_id", "must not be empty"));
        }
        let ext = self.domain.extent();
        if !ext.iter().all(|e| e.is_finite() && *e > 0.0) {
            return Err(SchemaError::new(
                "design_domain.bounds",
                "domain must have strictly positive extent on all axes",
            ));
        }
        for (i, k) in self.keep_out.iter().enumerate() {
            if !k.is_valid() {
                return Err(SchemaError::new(
                    format!("design_domain.keep_out[{i}]"),
                    "min exceeds max",
                ));
            }
        }

        let mut ids = HashSet::new();
        for (i, s) in self.selectors.iter().enumerate() {
            if !ids.insert(s.id.as_str()) {
                return Err(SchemaError::new(
                    format!("spatial_selectors[{i}].id"),
                    format!("duplicate selector id `{}`", s.id),
                ));
            }
            if !s.query.is_valid() {
                return Err(SchemaError::new(
                    format!("spatial_selectors[{i}].query"),
                    "negative extent",
                ));
            }
            if !s.query.intersects(&self.domain) {
                return Err(SchemaError::new(
                    format!("spatial_selectors[{i}].query"),
                    format!("selector `{}` does not intersect the design domain", s.id),
                ));
            }
        }

        if self.boundary_conditions.is_empty() {
            return Err(SchemaError::new(
                "boundary_conditions",
                "at least one boundary condition is required",
            ));
        }
        for (i, bc) in self.boundary_conditions.iter().enumerate() {
            if !ids.contains(bc.selector_id.as_str()) {
                return Err(SchemaError::new(
                    format!("boundary_conditions[{i}].spatial_selector_id"),
                    format!("unknown selector `{}`", bc.selector_id),
                ));
            }
            if bc.dof_lock.count() == 0 {
                return Err(SchemaError::new(
                    format!("boundary_conditions[{i}].dof_lock"),
                    "at least one degree of freedom must be locked",
                ));
            }
        }

        if self.loads.is_empty() {
            return Err(SchemaError::new("loads", "at least one load is required"));
        }
        for (i, load) in self.loads.iter().enumerate() {
            if !ids.contains(load.selector_id.as_str()) {
                return Err(SchemaError::new(
                    format!("loads[{i}].spatial_selector_id"),
                    format!("unknown selector `{}`", load.selector_id),
                ));
            }
            if !(load.magnitude_newtons.is_finite() && load.magnitude_newtons > 0.0) {
                return Err(SchemaError::new(
                    format!("loads[{i}].magnitude_newtons"),
                    "magnitude must be positive",
                ));
            }
            let n = norm(load.direction);
            if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
                return Err(SchemaError::new(
                    format!("loads[{i}].direction"),
                    format!("direction must be a unit vector (|d| = {n})"),
                ));
            }
        }
        Ok(())
    }

    pub fn selector(&self, id: &str) -> Option<&SpatialSelector> {
        self.selectors.iter().find(|s| s.id == id)
    }

    /// Selectors referenced by at least one boundary condition, in
    /// boundary-condition order without duplicates.
    pub fn support_selectors(&self) -> Vec<&SpatialSelector> {
        let mut seen = HashSet::new();
        self.boundary_conditions
            .iter()
            .filter(|bc| seen.insert(bc.selector_id.as_str()))
            .filter_map(|bc| self.selector(&bc.selector_id))
            .collect()
    }

    /// Selectors referenced by at least one load.
    pub fn load_selectors(&self) -> Vec<&SpatialSelector> {
        let mut seen = HashSet::new();
        self.loads
            .iter()
            .filter(|l| seen.insert(l.selector_id.as_str()))
            .filter_map(|l| self.selector(&l.selector_id))
            .collect()
    }

    /// Whether `p` is allowed to hold material: inside the domain box and
    /// outside every keep-out region.
    pub fn allows(&self, p: Vec3) -> bool {
        self.domain.contains(p) && !self.keep_out.iter().any(|k| k.contains(p))
    }

    pub fn total_applied_force(&self) -> Vec3 {
        self.loads.iter().fold([0.0; 3], |acc, l| {
            let f = l.force_vector();
            [acc[0] + f[0], acc[1] + f[1], acc[2] + f[2]]
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("load case serialization cannot fail")
    }
}

/// Scales all coordinates by `geom_scale` (about the origin) and every load
/// magnitude by `force_scale`. Identifiers are unchanged.
pub fn apply_variant(case: &LoadCase, v: VariantSpec) -> LoadCase {
    let g = v.geom_scale;
    let mut out = case.clone();
    out.domain = case.domain.scaled(g);
    out.keep_out = case.keep_out.iter().map(|k| k.scaled(g)).collect();
    for s in &mut out.selectors {
        s.query = s.query.scaled(g);
    }
    for l in &mut out.loads {
        l.magnitude_newtons *= v.force_scale;
    }
    out
}

/// Cartesian product in case-major, then geometric, then force order.
pub fn enumerate_variants(
    cases: &[LoadCase],
    geom_scales: &[f64],
    force_scales: &[f64],
) -> Vec<(LoadCase, VariantSpec)> {
    let mut out = Vec::with_capacity(cases.len() * geom_scales.len() * force_scales.len());
    for case in cases {
        for &g in geom_scales {
            for &f in force_scales {
                let v = VariantSpec::new(g, f);
                out.push((apply_variant(case, v), v));
            }
        }
    }
    out
}
