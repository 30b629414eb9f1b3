//! Geometry programs: a small JSON CSG language that agents emit as their
//! design, plus surface-mesh ingestion and face counting.
//!
//! ```json
//! {"op":"difference","children":[
//!    {"op":"box","min":[0,0,0],"max":[10,10,10]},
//!    {"op":"cylinder","p0":[5,5,-1],"p1":[5,5,11],"radius":2}]}
//! ```
//!
//! `difference` subtracts the union of all remaining children from the first
//! one. Membership uses non-strict inequalities, so points exactly on a
//! primitive's boundary count as inside that primitive.

mod faces;
mod stl;
pub mod tessellate;

use serde::{Deserialize, Serialize};

use crate::aabb::Aabb;
use crate::math::{dot, norm, sub, Vec3};
use crate::meshing::voxelize;

pub use faces::{count_faces, DEFAULT_CREASE_ANGLE};
pub use stl::{load_stl, point_in_mesh, write_stl_binary, MeshClassifier, SurfaceMesh};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid geometry program: {0}")]
    Parse(String),
    #[error("invalid geometry program at {path}: {message}")]
    Invalid { path: String, message: String },
    #[error("geometry is empty at the requested resolution")]
    EmptyGeometry,
    #[error("resolution must be at least {min}, got {got}")]
    Resolution { min: usize, got: usize },
    #[error("malformed STL: {0}")]
    Format(String),
    #[error("mesh contains no triangles")]
    EmptyMesh,
    #[error("mesh is not watertight: edge ({0}, {1}) is used by {2} triangles")]
    NotWatertight(usize, usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtrudePlane {
    Xy,
    Yz,
    Zx,
}

impl ExtrudePlane {
    /// Axis indices `(u, v, w)`: the sketch coordinates and the extrusion
    /// axis.
    pub fn axes(self) -> (usize, usize, usize) {
        match self {
            ExtrudePlane::Xy => (0, 1, 2),
            ExtrudePlane::Yz => (1, 2, 0),
            ExtrudePlane::Zx => (2, 0, 1),
        }
    }
}

/// One node of a geometry program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Solid {
    Box {
        min: Vec3,
        max: Vec3,
    },
    Cylinder {
        p0: Vec3,
        p1: Vec3,
        radius: f64,
    },
    Sphere {
        center: Vec3,
        radius: f64,
    },
    Extrude {
        plane: ExtrudePlane,
        polygon: Vec<[f64; 2]>,
        lo: f64,
        hi: f64,
    },
    Union {
        children: Vec<Solid>,
    },
    Difference {
        children: Vec<Solid>,
    },
    Intersection {
        children: Vec<Solid>,
    },
}

/// A validated CSG expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Solid", into = "Solid")]
pub struct GeometryProgram {
    root: Solid,
}

impl TryFrom<Solid> for GeometryProgram {
    type Error = GeometryError;

    fn try_from(root: Solid) -> Result<Self, GeometryError> {
        GeometryProgram::new(root)
    }
}

impl From<GeometryProgram> for Solid {
    fn from(p: GeometryProgram) -> Solid {
        p.root
    }
}

impl GeometryProgram {
    pub fn new(root: Solid) -> Result<Self, GeometryError> {
        validate_node(&root, "$")?;
        Ok(GeometryProgram { root })
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let root: Solid = serde_json::from_str(text).map_err(|e| GeometryError::Parse(e.to_string()))?;
        Self::new(root)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, GeometryError> {
        let root: Solid = serde_json::from_value(value).map_err(|e| GeometryError::Parse(e.to_string()))?;
        Self::new(root)
    }

    pub fn root(&self) -> &Solid {
        &self.root
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.root).expect("program serialization cannot fail")
    }

    pub fn contains(&self, p: Vec3) -> bool {
        contains(&self.root, p)
    }

    /// Conservative bounding box. Empty (inverted) when an intersection of
    /// disjoint children is provably empty.
    pub fn bounding_box(&self) -> Aabb {
        bounding_box(&self.root)
    }

    /// Number of primitive leaves.
    pub fn primitive_count(&self) -> usize {
        fn walk(s: &Solid) -> usize {
            match s {
                Solid::Union { children } | Solid::Difference { children } | Solid::Intersection { children } => {
                    children.iter().map(walk).sum()
                }
                _ => 1,
            }
        }
        walk(&self.root)
    }
}

fn invalid(path: &str, message: impl Into<String>) -> GeometryError {
    GeometryError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

fn finite3(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn validate_node(node: &Solid, path: &str) -> Result<(), GeometryError> {
    match node {
        Solid::Box { min, max } => {
            if !finite3(min) || !finite3(max) {
                return Err(invalid(path, "non-finite coordinate"));
            }
            if (0..3).any(|a| max[a] <= min[a]) {
                return Err(invalid(path, "box must have positive extent on every axis"));
            }
        }
        Solid::Cylinder { p0, p1, radius } => {
            if !finite3(p0) || !finite3(p1) || !radius.is_finite() {
                return Err(invalid(path, "non-finite parameter"));
            }
            if *radius <= 0.0 {
                return Err(invalid(path, "cylinder radius must be positive"));
            }
            if norm(sub(*p1, *p0)) <= 0.0 {
                return Err(invalid(path, "cylinder axis has zero length"));
            }
        }
        Solid::Sphere { center, radius } => {
            if !finite3(center) || !radius.is_finite() {
                return Err(invalid(path, "non-finite parameter"));
            }
            if *radius <= 0.0 {
                return Err(invalid(path, "sphere radius must be positive"));
            }
        }
        Solid::Extrude { polygon, lo, hi, .. } => {
            if polygon.len() < 3 {
                return Err(invalid(path, "extrude polygon needs at least 3 vertices"));
            }
            if polygon.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                return Err(invalid(path, "non-finite polygon vertex"));
            }
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(path, "extrude requires hi > lo"));
            }
            if polygon_area(polygon).abs() <= 0.0 {
                return Err(invalid(path, "extrude polygon has zero area"));
            }
            if !polygon_is_simple(polygon) {
                return Err(invalid(path, "extrude polygon self-intersects"));
            }
        }
        Solid::Union { children } | Solid::Intersection { children } => {
            if children.is_empty() {
                return Err(invalid(path, "boolean node needs at least one child"));
            }
            for (i, c) in children.iter().enumerate() {
                validate_node(c, &format!("{path}.children[{i}]"))?;
            }
        }
        Solid::Difference { children } => {
            if children.len() < 2 {
                return Err(invalid(path, "difference needs at least two children"));
            }
            for (i, c) in children.iter().enumerate() {
                validate_node(c, &format!("{path}.children[{i}]"))?;
            }
        }
    }
    Ok(())
}

/// Signed area (counter-clockwise positive).
pub(crate) fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

fn orient2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = orient2(c, d, a);
    let d2 = orient2(c, d, b);
    let d3 = orient2(a, b, c);
    let d4 = orient2(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// No two non-adjacent edges touch and no vertex repeats.
pub(crate) fn polygon_is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if poly[i] == poly[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Crossing-number test; boundary points may resolve either way.
pub(crate) fn point_in_polygon(poly: &[[f64; 2]], u: f64, v: f64) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi[1] > v) != (pj[1] > v) {
            let x = pj[0] + (v - pj[1]) * (pi[0] - pj[0]) / (pi[1] - pj[1]);
            if u < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Exact set-theoretic membership of `p` in `node`.
pub fn contains(node: &Solid, p: Vec3) -> bool {
    match node {
        Solid::Box { min, max } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
        Solid::Cylinder { p0, p1, radius } => {
            let axis = sub(*p1, *p0);
            let len2 = dot(axis, axis);
            let rel = sub(p, *p0);
            let t = dot(rel, axis);
            if t < 0.0 || t > len2 {
                return false;
            }
            let radial2 = dot(rel, rel) - t * t / len2;
            radial2 <= radius * radius
        }
        Solid::Sphere { center, radius } => {
            let d = sub(p, *center);
            dot(d, d) <= radius * radius
        }
        Solid::Extrude { plane, polygon, lo, hi } => {
            let (u, v, w) = plane.axes();
            p[w] >= *lo && p[w] <= *hi && point_in_polygon(polygon, p[u], p[v])
        }
        Solid::Union { children } => children.iter().any(|c| contains(c, p)),
        Solid::Intersection { children } => children.iter().all(|c| contains(c, p)),
        Solid::Difference { children } => contains(&children[0], p) && !children[1..].iter().any(|c| contains(c, p)),
    }
}

pub fn bounding_box(node: &Solid) -> Aabb {
    match node {
        Solid::Box { min, max } => Aabb::new(*min, *max),
        Solid::Cylinder { p0, p1, radius } => {
            let axis = sub(*p1, *p0);
            let len = norm(axis);
            let mut bb = Aabb::empty();
            for a in 0..3 {
                let d = axis[a] / len;
                let r = radius * (1.0 - d * d).max(0.0).sqrt();
                bb.min[a] = p0[a].min(p1[a]) - r;
                bb.max[a] = p0[a].max(p1[a]) + r;
            }
            bb
        }
        Solid::Sphere { center, radius } => Aabb::new(*center, *center).inflate(*radius),
        Solid::Extrude { plane, polygon, lo, hi } => {
            let (u, v, w) = plane.axes();
            let mut bb = Aabb::empty();
            for q in polygon {
                let mut p = [0.0; 3];
                p[u] = q[0];
                p[v] = q[1];
                p[w] = *lo;
                bb.include(p);
                p[w] = *hi;
                bb.include(p);
            }
            bb
        }
        Solid::Union { children } => children
            .iter()
            .map(bounding_box)
            .fold(Aabb::empty(), |acc, b| acc.union(&b)),
        Solid::Intersection { children } => {
            let mut it = children.iter().map(bounding_box);
            let first = it.next().expect("validated: non-empty");
            it.fold(first, |acc, b| acc.intersection(&b))
        }
        Solid::Difference { children } => bounding_box(&children[0]),
    }
}

pub const MIN_RESOLUTION: usize = 8;

/// Volume estimate in mm³: occupied voxel count times voxel volume over the
/// program's bounding box, sampling voxel centres.
pub fn estimate_volume(program: &GeometryProgram, resolution: usize) -> Result<f64, GeometryError> {
    if resolution < MIN_RESOLUTION {
        return Err(GeometryError::Resolution {
            min: MIN_RESOLUTION,
            got: resolution,
        });
    }
    let bb = program.bounding_box();
    if !bb.is_valid() || bb.volume() <= 0.0 {
        return Err(GeometryError::EmptyGeometry);
    }
    let grid = voxelize(&|p| program.contains(p), &bb, resolution);
    let n = grid.occupied_count();
    if n == 0 {
        return Err(GeometryError::EmptyGeometry);
    }
    Ok(n as f64 * grid.voxel_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube10() -> Solid {
        Solid::Box {
            min: [0.0; 3],
            max: [10.0; 3],
        }
    }

    #[test]
    fn box_membership() {
        let p = GeometryProgram::new(cube10()).unwrap();
        assert!(p.contains([5.0, 5.0, 5.0]));
        assert!(!p.contains([15.0, 5.0, 5.0]));
    }

    #[test]
    fn drilled_box_excludes_bore() {
        let p = GeometryProgram::from_json(
            r#"{"op":"difference","children":[
                {"op":"box","min":[0,0,0],"max":[10,10,10]},
                {"op":"cylinder","p0":[5,5,-1],"p1":[5,5,11],"radius":2}]}"#,
        )
        .unwrap();
        assert!(!p.contains([5.0, 5.0, 5.0]));
        assert!(p.contains([1.0, 1.0, 5.0]));
    }

    #[test]
    fn extrude_uses_plane_axes() {
        let p = GeometryProgram::from_json(
            r#"{"op":"extrude","plane":"yz","polygon":[[0,0],[10,0],[0,10]],"lo":0,"hi":5}"#,
        )
        .unwrap();
        // u = y, v = z, w = x
        assert!(p.contains([2.5, 2.0, 2.0]));
        assert!(!p.contains([2.5, 8.0, 8.0]));
        assert!(!p.contains([6.0, 2.0, 2.0]));
    }

    #[test]
    fn rejects_bad_programs() {
        let bad = [
            r#"{"op":"box","min":[0,0,0],"max":[0,1,1]}"#,
            r#"{"op":"sphere","center":[0,0,0],"radius":-1}"#,
            r#"{"op":"difference","children":[{"op":"box","min":[0,0,0],"max":[1,1,1]}]}"#,
            r#"{"op":"union","children":[]}"#,
            r#"{"op":"extrude","plane":"xy","polygon":[[0,0],[1,1],[1,0],[0,1]],"lo":0,"hi":1}"#,
            r#"{"op":"extrude","plane":"xy","polygon":[[0,0],[1,0]],"lo":0,"hi":1}"#,
            r#"{"op":"torus","r":1}"#,
        ];
        for text in bad {
            assert!(GeometryProgram::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn aligned_box_volume_is_exact() {
        let p = GeometryProgram::new(cube10()).unwrap();
        assert_eq!(estimate_volume(&p, 64).unwrap(), 1000.0);
    }

    #[test]
    fn sphere_volume_within_two_percent() {
        let p = GeometryProgram::new(Solid::Sphere {
            center: [0.0; 3],
            radius: 10.0,
        })
        .unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 1000.0;
        let v = estimate_volume(&p, 128).unwrap();
        assert!((v - exact).abs() / exact < 0.02, "{v} vs {exact}");
    }

    #[test]
    fn self_subtraction_is_empty() {
        let p = GeometryProgram::new(Solid::Difference {
            children: vec![cube10(), cube10()],
        })
        .unwrap();
        assert_eq!(estimate_volume(&p, 16), Err(GeometryError::EmptyGeometry));
    }

    #[test]
    fn volume_converges_for_curved_primitives() {
        let shapes = [
            Solid::Sphere {
                center: [0.0; 3],
                radius: 7.0,
            },
            Solid::Cylinder {
                p0: [0.0, 0.0, 0.0],
                p1: [3.0, 4.0, 12.0],
                radius: 3.0,
            },
        ];
        let exact = [
            4.0 / 3.0 * std::f64::consts::PI * 343.0,
            std::f64::consts::PI * 9.0 * 13.0,
        ];
        for (s, v_true) in shapes.into_iter().zip(exact) {
            let p = GeometryProgram::new(s).unwrap();
            let errs: Vec<f64> = [16, 32, 64, 128]
                .iter()
                .map(|&r| (estimate_volume(&p, r).unwrap() - v_true).abs())
                .collect();
            let diffs: Vec<f64> = [16, 32, 64]
                .iter()
                .map(|&r| (estimate_volume(&p, r).unwrap() - estimate_volume(&p, 2 * r).unwrap()).abs())
                .collect();
            assert!(diffs[2] < diffs[0], "{diffs:?}");
            assert!(errs[3] < errs[0], "{errs:?}");
        }
    }

    fn arb_box() -> impl Strategy<Value = Solid> {
        (prop::array::uniform3(-5.0..5.0f64), prop::array::uniform3(0.5..6.0f64)).prop_map(|(min, ext)| Solid::Box {
            min,
            max: [min[0] + ext[0], min[1] + ext[1], min[2] + ext[2]],
        })
    }

    fn arb_sphere() -> impl Strategy<Value = Solid> {
        (prop::array::uniform3(-4.0..4.0f64), 0.5..5.0f64).prop_map(|(center, radius)| Solid::Sphere { center, radius })
    }

    proptest! {
        #[test]
        fn booleans_are_monotone(
            a in prop_oneof![arb_box(), arb_sphere()],
            b in prop_oneof![arb_box(), arb_sphere()],
            pts in prop::collection::vec(prop::array::uniform3(-8.0..8.0f64), 64),
        ) {
            let union = Solid::Union { children: vec![a.clone(), b.clone()] };
            let inter = Solid::Intersection { children: vec![a.clone(), b.clone()] };
            let diff = Solid::Difference { children: vec![a.clone(), b.clone()] };
            for p in pts {
                let (ia, ib) = (contains(&a, p), contains(&b, p));
                if contains(&inter, p) {
                    prop_assert!(ia && ib);
                }
                if ia || ib {
                    prop_assert!(contains(&union, p));
                }
                if contains(&diff, p) {
                    prop_assert!(ia && !ib);
                }
            }
        }

        #[test]
        fn bounding_box_encloses_members(
            a in prop_oneof![arb_box(), arb_sphere()],
            pts in prop::collection::vec(prop::array::uniform3(-10.0..10.0f64), 64),
        ) {
            let bb = bounding_box(&a).inflate(1e-9);
            for p in pts {
                if contains(&a, p) {
                    prop_assert!(bb.contains(p));
                }
            }
        }
    }
}
