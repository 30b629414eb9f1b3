use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::aabb::Aabb;
use crate::math::{cross, dot, norm, sub, Vec3};

/// Indexed triangle mesh in millimetres.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl SurfaceMesh {
    /// Builds a mesh from triangle soup: vertices with bit-identical
    /// coordinates are merged and degenerate triangles dropped.
    pub fn from_soup(corners: &[[Vec3; 3]]) -> SurfaceMesh {
        let mut index: HashMap<[u64; 3], usize> = HashMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(corners.len());
        for tri in corners {
            let mut ids = [0usize; 3];
            for (k, v) in tri.iter().enumerate() {
                // -0.0 and 0.0 are the same coordinate.
                let key = v.map(|c| if c == 0.0 { 0u64 } else { c.to_bits() });
                ids[k] = *index.entry(key).or_insert_with(|| {
                    vertices.push(*v);
                    vertices.len() - 1
                });
            }
            triangles.push(ids);
        }
        let mut mesh = SurfaceMesh { vertices, triangles };
        mesh.drop_degenerate();
        mesh
    }

    pub fn drop_degenerate(&mut self) {
        let verts = &self.vertices;
        self.triangles.retain(|t| {
            t[0] != t[1]
                && t[1] != t[2]
                && t[0] != t[2]
                && norm(cross(sub(verts[t[1]], verts[t[0]]), sub(verts[t[2]], verts[t[0]]))) > 0.0
        });
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized normal (twice the area vector).
    pub fn area_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        cross(sub(b, a), sub(c, a))
    }

    pub fn bounding_box(&self) -> Aabb {
        let mut bb = Aabb::empty();
        for v in &self.vertices {
            bb.include(*v);
        }
        bb
    }

    /// Concatenates another mesh, reindexing its triangles.
    pub fn append(&mut self, other: &SurfaceMesh) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
    }

    /// Signed enclosed volume by the divergence theorem (positive for an
    /// outward-oriented closed surface).
    pub fn enclosed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Errors with the first edge not shared by exactly two triangles.
    pub fn check_watertight(&self) -> Result<(), GeometryError> {
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut bad: Vec<_> = edges.into_iter().filter(|(_, n)| *n != 2).collect();
        bad.sort();
        match bad.first() {
            Some(((a, b), n)) => Err(GeometryError::NotWatertight(*a, *b, *n)),
            None => Ok(()),
        }
    }
}

/// Parses a binary or ASCII STL file.
pub fn load_stl(bytes: &[u8]) -> Result<SurfaceMesh, GeometryError> {
    let looks_ascii = bytes
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .map(|i| bytes[i..].starts_with(b"solid"))
        .unwrap_or(false);
    let binary_size_matches = bytes.len() >= 84 && {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        bytes.len() == 84 + 50 * n
    };
    let soup = if binary_size_matches {
        parse_binary(bytes)?
    } else if looks_ascii {
        parse_ascii(bytes)?
    } else {
        // Report the binary framing problem; that is what the file claims to be.
        parse_binary(bytes)?
    };
    let mesh = SurfaceMesh::from_soup(&soup);
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    Ok(mesh)
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<[Vec3; 3]>, GeometryError> {
    if bytes.len() < 84 {
        return Err(GeometryError::Format(format!(
            "binary STL needs an 84-byte header, got {} bytes",
            bytes.len()
        )));
    }
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    let expected = 84 + 50 * n;
    if bytes.len() < expected {
        return Err(GeometryError::Format(format!(
            "truncated binary STL: {n} triangles need {expected} bytes, got {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(GeometryError::Format(format!(
            "binary STL has {} trailing bytes",
            bytes.len() - expected
        )));
    }
    let f32_at = |off: usize| f32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]) as f64;
    let mut soup = Vec::with_capacity(n);
    for i in 0..n {
        let rec = 84 + 50 * i;
        let mut tri = [[0.0; 3]; 3];
        for (k, v) in tri.iter_mut().enumerate() {
            let base = rec + 12 + 12 * k;
            *v = [f32_at(base), f32_at(base + 4), f32_at(base + 8)];
        }
        soup.push(tri);
    }
    Ok(soup)
}

fn parse_ascii(bytes: &[u8]) -> Result<Vec<[Vec3; 3]>, GeometryError> {
    let text = std::str::from_utf8(bytes).map_err(|_| GeometryError::Format("ASCII STL is not valid UTF-8".into()))?;
    let mut verts: Vec<Vec3> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        if it.next() != Some("vertex") {
            continue;
        }
        let mut v = [0.0; 3];
        for c in v.iter_mut() {
            *c = it
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| GeometryError::Format(format!("bad vertex on line {}", lineno + 1)))?;
        }
        verts.push(v);
    }
    if !verts.len().is_multiple_of(3) {
        return Err(GeometryError::Format(format!(
            "{} vertex records do not form whole triangles",
            verts.len()
        )));
    }
    Ok(verts.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Binary STL with a zeroed header and per-facet normals.
pub fn write_stl_binary(mesh: &SurfaceMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangles.len());
    out.extend_from_slice(&[0u8; 80]);
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for t in 0..mesh.triangles.len() {
        let n = crate::math::normalize(mesh.area_normal(t));
        for c in n {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
        for v in mesh.corners(t) {
            for c in v {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0u8; 2]);
    }
    out
}

// Ray directions tried in order; each is close to +x and none lies in a
// coordinate plane.
const RAY_DIRECTIONS: [Vec3; 4] = [
    [1.0, 1.234_567e-4, 2.345_678e-4],
    [1.0, -3.141_593e-4, 1.414_214e-4],
    [1.0, 2.718_282e-4, -1.732_051e-4],
    [1.0, -1.618_034e-4, -2.236_068e-4],
];

const GRAZE_EPS: f64 = 1e-10;

enum Crossing {
    Miss,
    Hit,
    Ambiguous,
}

fn ray_crossing(origin: Vec3, dir: Vec3, tri: [Vec3; 3]) -> Crossing {
    let e1 = sub(tri[1], tri[0]);
    let e2 = sub(tri[2], tri[0]);
    let pvec = cross(dir, e2);
    let det = dot(e1, pvec);
    let scale = norm(e1) * norm(e2);
    if det.abs() <= 1e-14 * scale {
        return Crossing::Miss;
    }
    let inv = 1.0 / det;
    let tvec = sub(origin, tri[0]);
    let u = dot(tvec, pvec) * inv;
    let qvec = cross(tvec, e1);
    let v = dot(dir, qvec) * inv;
    let t = dot(e2, qvec) * inv;
    if u < -GRAZE_EPS || v < -GRAZE_EPS || u + v > 1.0 + GRAZE_EPS || t < 0.0 {
        return Crossing::Miss;
    }
    if u < GRAZE_EPS || v < GRAZE_EPS || u + v > 1.0 - GRAZE_EPS {
        return Crossing::Ambiguous;
    }
    Crossing::Hit
}

/// Cached inside/outside classifier for a watertight mesh.
pub struct MeshClassifier<'a> {
    mesh: &'a SurfaceMesh,
    bounds: Aabb,
}

impl<'a> MeshClassifier<'a> {
    pub fn new(mesh: &'a SurfaceMesh) -> Result<Self, GeometryError> {
        if mesh.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        mesh.check_watertight()?;
        Ok(MeshClassifier {
            mesh,
            bounds: mesh.bounding_box(),
        })
    }

    /// Ray-crossing parity along a slightly perturbed +x ray. A ray that
    /// grazes an edge or vertex is recast along the next direction.
    pub fn contains(&self, p: Vec3) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        'dirs: for dir in RAY_DIRECTIONS {
            let mut crossings = 0usize;
            for t in 0..self.mesh.triangles.len() {
                match ray_crossing(p, dir, self.mesh.corners(t)) {
                    Crossing::Miss => {}
                    Crossing::Hit => crossings += 1,
                    Crossing::Ambiguous => continue 'dirs,
                }
            }
            return crossings % 2 == 1;
        }
        false
    }
}

/// Point membership for a watertight surface mesh.
pub fn point_in_mesh(mesh: &SurfaceMesh, p: Vec3) -> Result<bool, GeometryError> {
    Ok(MeshClassifier::new(mesh)?.contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tessellate;
    use crate::geometry::{contains, Solid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cube() -> SurfaceMesh {
        tessellate::box_mesh([0.0; 3], [1.0; 3])
    }

    #[test]
    fn binary_cube_round_trip() {
        let bytes = write_stl_binary(&unit_cube());
        assert_eq!(bytes.len(), 84 + 50 * 12);
        let mesh = load_stl(&bytes).unwrap();
        assert_eq!(mesh.vertices.len(), 8);
        assert_eq!(mesh.triangles.len(), 12);
    }

    #[test]
    fn truncated_binary_is_format_error() {
        let bytes = write_stl_binary(&unit_cube());
        let err = load_stl(&bytes[..bytes.len() - 7]).unwrap_err();
        assert!(matches!(err, GeometryError::Format(_)), "{err:?}");
        assert!(matches!(load_stl(&bytes[..40]), Err(GeometryError::Format(_))));
    }

    #[test]
    fn ascii_duplicates_are_merged() {
        let mesh = unit_cube();
        let mut text = String::from("solid cube\n");
        let mut records = Vec::new();
        for t in 0..mesh.triangles.len() {
            text.push_str("facet normal 0 0 0\nouter loop\n");
            for v in mesh.corners(t) {
                text.push_str(&format!("vertex {} {} {}\n", v[0], v[1], v[2]));
                records.push(v);
            }
            text.push_str("endloop\nendfacet\n");
        }
        text.push_str("endsolid cube\n");
        let loaded = load_stl(text.as_bytes()).unwrap();
        // sort-unique oracle over the raw records
        let mut keys: Vec<[u64; 3]> = records.iter().map(|v| v.map(f64::to_bits)).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(loaded.vertices.len(), keys.len());
        assert_eq!(loaded.triangles.len(), 12);
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let a = [0.0, 0.0, 0.0];
        let b = [1.0, 0.0, 0.0];
        let c = [0.0, 1.0, 0.0];
        let mesh = SurfaceMesh::from_soup(&[[a, b, c], [a, b, [2.0, 0.0, 0.0]], [a, a, c]]);
        assert_eq!(mesh.triangles.len(), 1);
    }

    #[test]
    fn cube_membership() {
        let mesh = tessellate::box_mesh([0.0; 3], [10.0; 3]);
        assert!(point_in_mesh(&mesh, [5.0, 5.0, 5.0]).unwrap());
        assert!(!point_in_mesh(&mesh, [20.0, 5.0, 5.0]).unwrap());
        // an unperturbed +x ray from here meets the x = 10 face exactly on
        // its triangle diagonal
        assert!(point_in_mesh(&mesh, [1.0, 5.0, 5.0]).unwrap());
    }

    #[test]
    fn open_mesh_rejected() {
        let mut mesh = unit_cube();
        mesh.triangles.pop();
        assert!(matches!(
            point_in_mesh(&mesh, [0.5; 3]),
            Err(GeometryError::NotWatertight(..))
        ));
    }

    fn near_box_boundary(p: Vec3, min: Vec3, max: Vec3, eps: f64) -> bool {
        (0..3).any(|a| (p[a] - min[a]).abs() < eps || (p[a] - max[a]).abs() < eps)
    }

    #[test]
    fn agrees_with_csg_on_random_points() {
        let (min, max) = ([0.0; 3], [10.0; 3]);
        let mesh = tessellate::box_mesh(min, max);
        let cls = MeshClassifier::new(&mesh).unwrap();
        let solid = Solid::Box { min, max };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut compared = 0;
        for _ in 0..1000 {
            let p = [
                rng.gen_range(-5.0..15.0),
                rng.gen_range(-5.0..15.0),
                rng.gen_range(-5.0..15.0),
            ];
            if near_box_boundary(p, min, max, 1e-6) {
                continue;
            }
            compared += 1;
            assert_eq!(cls.contains(p), contains(&solid, p), "{p:?}");
        }
        assert!(compared > 990);
    }

    #[test]
    fn tessellations_agree_with_csg_membership() {
        let cylinder = Solid::Cylinder {
            p0: [1.0, 2.0, 0.0],
            p1: [4.0, 6.0, 9.0],
            radius: 3.0,
        };
        let cyl_mesh = tessellate::cylinder_mesh([1.0, 2.0, 0.0], [4.0, 6.0, 9.0], 3.0, 512);
        let poly = vec![[0.0, 0.0], [8.0, 0.0], [8.0, 3.0], [3.0, 3.0], [3.0, 7.0], [0.0, 7.0]];
        let extrude = Solid::Extrude {
            plane: crate::geometry::ExtrudePlane::Zx,
            polygon: poly.clone(),
            lo: -2.0,
            hi: 5.0,
        };
        let ext_mesh = tessellate::extrude_mesh(crate::geometry::ExtrudePlane::Zx, &poly, -2.0, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (solid, mesh) in [(cylinder, cyl_mesh), (extrude, ext_mesh)] {
            let cls = MeshClassifier::new(&mesh).unwrap();
            let bb = crate::geometry::bounding_box(&solid).inflate(1.0);
            let mut agree = 0usize;
            let n = 4000;
            for _ in 0..n {
                let p = [
                    rng.gen_range(bb.min[0]..bb.max[0]),
                    rng.gen_range(bb.min[1]..bb.max[1]),
                    rng.gen_range(bb.min[2]..bb.max[2]),
                ];
                if cls.contains(p) == contains(&solid, p) {
                    agree += 1;
                }
            }
            assert!(agree as f64 / n as f64 >= 0.999, "{agree}/{n}");
        }
    }
}
