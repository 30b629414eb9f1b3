//! Outward-oriented closed triangulations of the CSG primitives.

use super::{polygon_area, ExtrudePlane, SurfaceMesh};
use crate::math::{add, cross, normalize, scale, sub, Vec3};

pub fn box_mesh(min: Vec3, max: Vec3) -> SurfaceMesh {
    let v = |i: usize| -> Vec3 {
        [
            if i & 1 == 0 { min[0] } else { max[0] },
            if i & 2 == 0 { min[1] } else { max[1] },
            if i & 4 == 0 { min[2] } else { max[2] },
        ]
    };
    let vertices: Vec<Vec3> = (0..8).map(v).collect();
    // quads listed counter-clockwise seen from outside
    let quads = [
        [0, 2, 3, 1], // z min
        [4, 5, 7, 6], // z max
        [0, 1, 5, 4], // y min
        [2, 6, 7, 3], // y max
        [0, 4, 6, 2], // x min
        [1, 3, 7, 5], // x max
    ];
    let mut triangles = Vec::with_capacity(12);
    for q in quads {
        triangles.push([q[0], q[1], q[2]]);
        triangles.push([q[0], q[2], q[3]]);
    }
    SurfaceMesh { vertices, triangles }
}

/// Closed cylinder with `segments` facets around the lateral surface.
pub fn cylinder_mesh(p0: Vec3, p1: Vec3, radius: f64, segments: usize) -> SurfaceMesh {
    assert!(segments >= 3);
    let axis = normalize(sub(p1, p0));
    let helper = if axis[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = normalize(cross(axis, helper));
    let e2 = cross(axis, e1);
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for base in [p0, p1] {
        for k in 0..segments {
            let a = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
            let off = add(scale(e1, radius * a.cos()), scale(e2, radius * a.sin()));
            vertices.push(add(base, off));
        }
    }
    let c0 = vertices.len();
    vertices.push(p0);
    vertices.push(p1);
    let c1 = c0 + 1;
    let n = segments;
    let mut triangles = Vec::with_capacity(4 * n);
    for k in 0..n {
        let k1 = (k + 1) % n;
        // (e1, e2, axis) is right-handed, so increasing angle is
        // counter-clockwise seen from the p1 end.
        triangles.push([c0, k1, k]);
        triangles.push([c1, n + k, n + k1]);
        triangles.push([k, k1, n + k1]);
        triangles.push([k, n + k1, n + k]);
    }
    SurfaceMesh { vertices, triangles }
}

pub fn sphere_mesh(center: Vec3, radius: f64, stacks: usize, slices: usize) -> SurfaceMesh {
    assert!(stacks >= 2 && slices >= 3);
    let mut vertices = vec![add(center, [0.0, 0.0, -radius])];
    for i in 1..stacks {
        let phi = std::f64::consts::PI * i as f64 / stacks as f64;
        let (z, r) = (-radius * phi.cos(), radius * phi.sin());
        for j in 0..slices {
            let th = 2.0 * std::f64::consts::PI * j as f64 / slices as f64;
            vertices.push(add(center, [r * th.cos(), r * th.sin(), z]));
        }
    }
    vertices.push(add(center, [0.0, 0.0, radius]));
    let top = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + (j % slices);
    let mut triangles = Vec::new();
    for j in 0..slices {
        triangles.push([0, ring(1, j + 1), ring(1, j)]);
        triangles.push([top, ring(stacks - 1, j), ring(stacks - 1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            triangles.push([ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)]);
            triangles.push([ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)]);
        }
    }
    SurfaceMesh { vertices, triangles }
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
pub(crate) fn triangulate_polygon(poly: &[[f64; 2]]) -> Vec<[usize; 3]> {
    fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    }
    fn in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
        cross2(a, b, p) >= 0.0 && cross2(b, c, p) >= 0.0 && cross2(c, a, p) >= 0.0
    }
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::with_capacity(poly.len().saturating_sub(2));
    let mut guard = 0;
    while idx.len() > 3 && guard < poly.len() * poly.len() {
        guard += 1;
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (ia, ib, ic) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross2(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx
                .iter()
                .filter(|&&k| k != ia && k != ib && k != ic)
                .any(|&k| in_triangle(poly[k], a, b, c));
            if blocked {
                continue;
            }
            out.push([ia, ib, ic]);
            idx.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        out.push([idx[0], idx[1], idx[2]]);
    }
    out
}

/// Prism of a simple polygon swept along the plane's normal axis.
pub fn extrude_mesh(plane: ExtrudePlane, polygon: &[[f64; 2]], lo: f64, hi: f64) -> SurfaceMesh {
    let mut poly = polygon.to_vec();
    if polygon_area(&poly) < 0.0 {
        poly.reverse();
    }
    let n = poly.len();
    let (u, v, w) = plane.axes();
    let lift = |q: [f64; 2], h: f64| {
        let mut p = [0.0; 3];
        p[u] = q[0];
        p[v] = q[1];
        p[w] = h;
        p
    };
    let mut vertices: Vec<Vec3> = poly.iter().map(|&q| lift(q, lo)).collect();
    vertices.extend(poly.iter().map(|&q| lift(q, hi)));
    let mut triangles = Vec::new();
    for t in triangulate_polygon(&poly) {
        triangles.push([t[0], t[2], t[1]]);
        triangles.push([n + t[0], n + t[1], n + t[2]]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([i, j, n + j]);
        triangles.push([i, n + j, n + i]);
    }
    SurfaceMesh { vertices, triangles }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_closed_and_outward() {
        let meshes = [
            (box_mesh([0.0; 3], [2.0, 3.0, 4.0]), 24.0, 1e-12),
            (
                cylinder_mesh([0.0; 3], [0.0, 0.0, 5.0], 1.0, 256),
                std::f64::consts::PI * 5.0,
                1e-3,
            ),
            (
                extrude_mesh(
                    ExtrudePlane::Xy,
                    &[[0.0, 0.0], [0.0, 2.0], [2.0, 2.0], [2.0, 0.0]],
                    0.0,
                    1.0,
                ),
                4.0,
                1e-12,
            ),
            (
                sphere_mesh([1.0, 1.0, 1.0], 2.0, 64, 128),
                4.0 / 3.0 * std::f64::consts::PI * 8.0,
                2e-3,
            ),
        ];
        for (mesh, vol, rel) in meshes {
            mesh.check_watertight().unwrap();
            let v = mesh.enclosed_volume();
            assert!((v - vol).abs() / vol < rel, "{v} vs {vol}");
        }
    }

    #[test]
    fn ear_clipping_covers_concave_polygon() {
        let poly = [[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [2.0, 1.0], [0.0, 4.0]];
        let tris = triangulate_polygon(&poly);
        assert_eq!(tris.len(), 3);
        let area: f64 = tris
            .iter()
            .map(|t| polygon_area(&[poly[t[0]], poly[t[1]], poly[t[2]]]))
            .sum();
        assert!((area - polygon_area(&poly)).abs() < 1e-12);
    }
}
