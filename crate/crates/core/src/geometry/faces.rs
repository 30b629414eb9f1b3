use std::collections::HashMap;

use super::SurfaceMesh;
use crate::math::{dot, norm};

/// About 20 degrees.
pub const DEFAULT_CREASE_ANGLE: f64 = 0.35;

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Number of smooth patches: edge-adjacent triangles are merged when the
/// angle between their normals is below `crease_angle` (radians).
pub fn count_faces(mesh: &SurfaceMesh, crease_angle: f64) -> usize {
    let n = mesh.triangles.len();
    if n == 0 {
        return 0;
    }
    let normals: Vec<_> = (0..n).map(|t| mesh.area_normal(t)).collect();
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    let cos_limit = crease_angle.cos();
    let mut sets = DisjointSet::new(n);
    for tris in edges.values() {
        for i in 0..tris.len() {
            for j in (i + 1)..tris.len() {
                let (na, nb) = (normals[tris[i]], normals[tris[j]]);
                let c = dot(na, nb) / (norm(na) * norm(nb));
                // strict: an exact crease_angle bend is a crease
                if c > cos_limit {
                    sets.union(tris[i], tris[j]);
                }
            }
        }
    }
    (0..n).filter(|&t| sets.find(t) == t).count()
}
