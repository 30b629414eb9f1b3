//! Linear-elastic analysis on constant-strain (tet4) elements.
//!
//! Units are mm, N and MPa throughout. The stiffness matrix is assembled
//! into CSR form over a node adjacency pattern and solved with
//! Jacobi-preconditioned conjugate gradient on the free degrees of freedom.

pub mod cg;
pub mod sparse;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::loadcase::{LoadCase, LoadKind};
use crate::math::{add, cross, dot, norm, scale, sub, Vec3};
use crate::meshing::{boundary_faces, select_nodes, TetMesh};

pub use cg::{pcg, CgOutcome, CgSettings, CgStatus};
pub use sparse::CsrMatrix;

/// Stress below this is treated as unloaded.
pub const ZERO_STRESS: f64 = 1e-9;
/// Safety factor reported for an unloaded structure.
pub const SAFETY_FACTOR_CAP: f64 = 1e6;
/// Elements smaller than this (mm³) are rejected.
pub const MIN_ELEMENT_VOLUME: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// MPa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// MPa
    pub yield_strength: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material {
            youngs_modulus: 70_000.0,
            poisson_ratio: 0.33,
            yield_strength: 250.0,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<(), FemError> {
        let ok = self.youngs_modulus > 0.0 && (0.0..0.5).contains(&self.poisson_ratio) && self.yield_strength > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FemError::InvalidMaterial(*self))
        }
    }

    /// Lamé parameters (λ, μ).
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        (lambda, mu)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("boundary condition on selector `{0}` selects no nodes")]
    FixAreaEmpty(String),
    #[error("load on selector `{0}` selects no nodes")]
    LoadAreaEmpty(String),
    #[error("element {element} has volume {volume:e} mm³")]
    DegenerateElement { element: usize, volume: f64 },
    #[error("solver stopped ({status:?}) after {iterations} iterations at relative residual {residual:e}")]
    SolveDiverged {
        status: CgStatus,
        iterations: usize,
        residual: f64,
    },
    #[error("invalid material {0:?}")]
    InvalidMaterial(Material),
    #[error("mesh has no elements")]
    EmptyMesh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemModel {
    pub mesh: TetMesh,
    /// Per dof (`3 * node + axis`): true when the displacement is locked.
    pub fixed: Vec<bool>,
    pub nodal_forces: Vec<Vec3>,
}

impl FemModel {
    pub fn fixed_dofs(&self) -> Vec<(usize, usize)> {
        self.fixed
            .iter()
            .enumerate()
            .filter_map(|(d, &f)| f.then_some((d / 3, d % 3)))
            .collect()
    }

    pub fn total_force(&self) -> Vec3 {
        self.nodal_forces.iter().fold([0.0; 3], |a, &f| add(a, f))
    }

    pub fn scale_forces(&mut self, s: f64) {
        for f in &mut self.nodal_forces {
            *f = scale(*f, s);
        }
    }
}

/// Applies the case's supports and loads to the nodes found by
/// [`select_nodes`] with the given tolerance.
///
/// A point force is split equally over every selected node. A distributed
/// force is spread over the boundary triangles whose three corners are all
/// selected, each triangle passing a third of its area share to each corner;
/// if the selection contains no whole triangle it falls back to an equal
/// split over the selected surface nodes.
pub fn build_model(mesh: &TetMesh, case: &LoadCase, tolerance: f64) -> Result<FemModel, FemError> {
    if mesh.tets.is_empty() {
        return Err(FemError::EmptyMesh);
    }
    let n = mesh.nodes.len();
    let mut fixed = vec![false; 3 * n];
    for bc in &case.boundary_conditions {
        let sel = case.selector(&bc.selector_id).expect("validated load case");
        let nodes = select_nodes(mesh, sel, tolerance);
        if nodes.is_empty() {
            return Err(FemError::FixAreaEmpty(bc.selector_id.clone()));
        }
        let lock = bc.dof_lock.as_array();
        for node in nodes {
            for axis in 0..3 {
                fixed[3 * node + axis] |= lock[axis];
            }
        }
    }

    let faces = boundary_faces(mesh);
    let mut on_surface = vec![false; n];
    for f in &faces {
        for &v in f {
            on_surface[v] = true;
        }
    }
    let mut nodal_forces = vec![[0.0; 3]; n];
    for load in &case.loads {
        let sel = case.selector(&load.selector_id).expect("validated load case");
        let nodes = select_nodes(mesh, sel, tolerance);
        if nodes.is_empty() {
            return Err(FemError::LoadAreaEmpty(load.selector_id.clone()));
        }
        let weights = match load.kind {
            LoadKind::PointForce => equal_weights(&nodes),
            LoadKind::DistributedForce => area_weights(mesh, &faces, &nodes).unwrap_or_else(|| {
                let surf: Vec<usize> = nodes.iter().copied().filter(|&v| on_surface[v]).collect();
                equal_weights(if surf.is_empty() { &nodes } else { &surf })
            }),
        };
        let total = load.force_vector();
        for (node, w) in weights {
            nodal_forces[node] = add(nodal_forces[node], scale(total, w));
        }
    }
    Ok(FemModel {
        mesh: mesh.clone(),
        fixed,
        nodal_forces,
    })
}

fn equal_weights(nodes: &[usize]) -> Vec<(usize, f64)> {
    let w = 1.0 / nodes.len() as f64;
    nodes.iter().map(|&v| (v, w)).collect()
}

fn area_weights(mesh: &TetMesh, faces: &[[usize; 3]], nodes: &[usize]) -> Option<Vec<(usize, f64)>> {
    let mut weight = std::collections::BTreeMap::new();
    let mut total = 0.0;
    for f in faces {
        if !f.iter().all(|v| nodes.binary_search(v).is_ok()) {
            continue;
        }
        let [a, b, c] = f.map(|v| mesh.nodes[v]);
        let area = 0.5 * norm(cross(sub(b, a), sub(c, a)));
        total += area;
        for &v in f {
            *weight.entry(v).or_insert(0.0) += area / 3.0;
        }
    }
    (total > 0.0).then(|| weight.into_iter().map(|(v, w)| (v, w / total)).collect())
}

/// Shape-function gradients and volume of one tet4 element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub grads: [Vec3; 4],
    pub volume: f64,
}

pub fn element_geometry(c: [Vec3; 4]) -> ElementGeometry {
    let e1 = sub(c[1], c[0]);
    let e2 = sub(c[2], c[0]);
    let e3 = sub(c[3], c[0]);
    let det = dot(e1, cross(e2, e3));
    let g1 = scale(cross(e2, e3), 1.0 / det);
    let g2 = scale(cross(e3, e1), 1.0 / det);
    let g3 = scale(cross(e1, e2), 1.0 / det);
    let g0 = scale(add(add(g1, g2), g3), -1.0);
    ElementGeometry {
        grads: [g0, g1, g2, g3],
        volume: det / 6.0,
    }
}

fn mesh_geometry(mesh: &TetMesh) -> Result<Vec<ElementGeometry>, FemError> {
    let geo: Vec<ElementGeometry> = (0..mesh.tets.len())
        .into_par_iter()
        .map(|t| element_geometry(mesh.tet_corners(t)))
        .collect();
    match geo.iter().position(|g| !(g.volume >= MIN_ELEMENT_VOLUME)) {
        Some(element) => Err(FemError::DegenerateElement {
            element,
            volume: geo[element].volume,
        }),
        None => Ok(geo),
    }
}

/// The 3×3 coupling block between local nodes with gradients `ga` and `gb`:
/// `V (λ ga gbᵀ + μ gb gaᵀ + μ (ga·gb) I)`.
#[inline]
pub fn stiffness_block(ga: Vec3, gb: Vec3, volume: f64, lambda: f64, mu: f64) -> [[f64; 3]; 3] {
    let gg = dot(ga, gb);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // pair the gradient products first so block (a, b) is exactly
            // the transpose of block (b, a)
            let mut v = lambda * (ga[i] * gb[j]) + mu * (ga[j] * gb[i]);
            if i == j {
                v += mu * gg;
            }
            k[i][j] = volume * v;
        }
    }
    k
}

/// Full 12×12 element stiffness, row-major over `(node, axis)`.
pub fn element_stiffness(corners: [Vec3; 4], material: &Material) -> [[f64; 12]; 12] {
    let g = element_geometry(corners);
    let (lambda, mu) = material.lame();
    let mut ke = [[0.0; 12]; 12];
    for a in 0..4 {
        for b in 0..4 {
            let k = stiffness_block(g.grads[a], g.grads[b], g.volume, lambda, mu);
            for i in 0..3 {
                for j in 0..3 {
                    ke[3 * a + i][3 * b + j] = k[i][j];
                }
            }
        }
    }
    ke
}

struct Incidence {
    /// node -> (element, local index), CSR-style
    ptr: Vec<usize>,
    entries: Vec<(usize, usize)>,
}

fn incidence(mesh: &TetMesh) -> Incidence {
    let n = mesh.nodes.len();
    let mut ptr = vec![0usize; n + 1];
    for t in &mesh.tets {
        for &v in t {
            ptr[v + 1] += 1;
        }
    }
    for i in 0..n {
        ptr[i + 1] += ptr[i];
    }
    let mut fill = ptr.clone();
    let mut entries = vec![(0, 0); ptr[n]];
    for (e, t) in mesh.tets.iter().enumerate() {
        for (local, &v) in t.iter().enumerate() {
            entries[fill[v]] = (e, local);
            fill[v] += 1;
        }
    }
    Incidence { ptr, entries }
}

/// Global stiffness in CSR form. Each node's three rows are filled by one
/// task that visits the node's incident elements in element order.
pub fn assemble_stiffness(mesh: &TetMesh, material: &Material) -> Result<CsrMatrix, FemError> {
    material.validate()?;
    if mesh.tets.is_empty() {
        return Err(FemError::EmptyMesh);
    }
    let geo = mesh_geometry(mesh)?;
    Ok(assemble_with(mesh, &geo, material))
}

fn assemble_with(mesh: &TetMesh, geo: &[ElementGeometry], material: &Material) -> CsrMatrix {
    let n = mesh.nodes.len();
    let inc = incidence(mesh);
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut nb: Vec<usize> = inc.entries[inc.ptr[v]..inc.ptr[v + 1]]
                .iter()
                .flat_map(|&(e, _)| mesh.tets[e])
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(3 * n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for nb in &neighbors {
        for _axis in 0..3 {
            for &m in nb {
                col_idx.extend([3 * m, 3 * m + 1, 3 * m + 2]);
            }
            row_ptr.push(col_idx.len());
        }
    }
    let mut values = vec![0.0; col_idx.len()];

    // split the value array into one slice per node (its three rows)
    let mut slices: Vec<&mut [f64]> = Vec::with_capacity(n);
    let mut rest: &mut [f64] = &mut values;
    for v in 0..n {
        let len = row_ptr[3 * v + 3] - row_ptr[3 * v];
        let (head, tail) = rest.split_at_mut(len);
        slices.push(head);
        rest = tail;
    }
    let (lambda, mu) = material.lame();
    slices.into_par_iter().enumerate().for_each(|(v, out)| {
        let nb = &neighbors[v];
        let width = 3 * nb.len();
        for &(e, a) in &inc.entries[inc.ptr[v]..inc.ptr[v + 1]] {
            let g = &geo[e];
            for (b, &m) in mesh.tets[e].iter().enumerate() {
                let k = stiffness_block(g.grads[a], g.grads[b], g.volume, lambda, mu);
                let pos = nb.binary_search(&m).expect("neighbor pattern");
                for i in 0..3 {
                    for j in 0..3 {
                        out[i * width + 3 * pos + j] += k[i][j];
                    }
                }
            }
        }
    });
    CsrMatrix {
        n: 3 * n,
        row_ptr,
        col_idx,
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemResult {
    pub displacements: Vec<Vec3>,
    /// Per element: `[σxx, σyy, σzz, τxy, τyz, τzx]` in MPa.
    pub element_stress: Vec<[f64; 6]>,
    pub element_von_mises: Vec<f64>,
    pub max_von_mises: f64,
    pub safety_factor: f64,
    pub solver_iterations: usize,
    pub residual: f64,
    /// Support reactions per node; zero on free nodes.
    pub reactions: Vec<Vec3>,
    pub applied_total: Vec3,
}

impl FemResult {
    pub fn reaction_total(&self) -> Vec3 {
        self.reactions.iter().fold([0.0; 3], |a, &r| add(a, r))
    }

    /// `|Σ reactions + Σ applied| / |Σ applied|`.
    pub fn equilibrium_error(&self) -> f64 {
        let net = add(self.reaction_total(), self.applied_total);
        norm(net) / norm(self.applied_total).max(f64::MIN_POSITIVE)
    }

    pub fn max_displacement(&self) -> f64 {
        self.displacements.iter().map(|&u| norm(u)).fold(0.0, f64::max)
    }

    /// Debug dump of per-node displacement and per-element von Mises.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "displacements": self.displacements,
            "element_von_mises": self.element_von_mises,
        })
        .to_string()
    }
}

pub fn safety_factor(yield_strength: f64, max_von_mises: f64) -> f64 {
    if max_von_mises < ZERO_STRESS {
        SAFETY_FACTOR_CAP
    } else {
        (yield_strength / max_von_mises).min(SAFETY_FACTOR_CAP)
    }
}

pub fn von_mises(s: [f64; 6]) -> f64 {
    let [sx, sy, sz, txy, tyz, tzx] = s;
    let v = sx * sx + sy * sy + sz * sz - sx * sy - sy * sz - sz * sx + 3.0 * (txy * txy + tyz * tyz + tzx * tzx);
    v.max(0.0).sqrt()
}

fn element_stress(g: &ElementGeometry, u: [Vec3; 4], lambda: f64, mu: f64) -> [f64; 6] {
    // displacement gradient H_ij = Σ_a u_a,i ∂_j N_a
    let mut h = [[0.0; 3]; 3];
    for a in 0..4 {
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] += u[a][i] * g.grads[a][j];
            }
        }
    }
    let tr = h[0][0] + h[1][1] + h[2][2];
    let eps = |i: usize, j: usize| 0.5 * (h[i][j] + h[j][i]);
    [
        lambda * tr + 2.0 * mu * h[0][0],
        lambda * tr + 2.0 * mu * h[1][1],
        lambda * tr + 2.0 * mu * h[2][2],
        2.0 * mu * eps(0, 1),
        2.0 * mu * eps(1, 2),
        2.0 * mu * eps(2, 0),
    ]
}

pub fn solve(model: &FemModel, material: &Material) -> Result<FemResult, FemError> {
    solve_with(model, material, &CgSettings::default())
}

pub fn solve_with(model: &FemModel, material: &Material, settings: &CgSettings) -> Result<FemResult, FemError> {
    material.validate()?;
    let mesh = &model.mesh;
    if mesh.tets.is_empty() {
        return Err(FemError::EmptyMesh);
    }
    let geo = mesh_geometry(mesh)?;
    let k = assemble_with(mesh, &geo, material);
    let f: Vec<f64> = model.nodal_forces.iter().flatten().copied().collect();
    let free: Vec<bool> = model.fixed.iter().map(|&x| !x).collect();
    let out = pcg(&k, &f, &free, settings);
    if out.status != CgStatus::Converged {
        return Err(FemError::SolveDiverged {
            status: out.status,
            iterations: out.iterations,
            residual: out.rel_residual,
        });
    }
    let ku = k.mul(&out.x);
    let n = mesh.nodes.len();
    let reactions: Vec<Vec3> = (0..n)
        .map(|v| {
            let mut r = [0.0; 3];
            for a in 0..3 {
                let d = 3 * v + a;
                if model.fixed[d] {
                    r[a] = ku[d] - f[d];
                }
            }
            r
        })
        .collect();
    let displacements: Vec<Vec3> = out.x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let (lambda, mu) = material.lame();
    let element_stress: Vec<[f64; 6]> = (0..mesh.tets.len())
        .into_par_iter()
        .map(|e| {
            let u = mesh.tets[e].map(|v| displacements[v]);
            element_stress(&geo[e], u, lambda, mu)
        })
        .collect();
    let element_von_mises: Vec<f64> = element_stress.iter().map(|&s| von_mises(s)).collect();
    let max_von_mises = element_von_mises.iter().copied().fold(0.0, f64::max);
    Ok(FemResult {
        displacements,
        element_stress,
        element_von_mises,
        max_von_mises,
        safety_factor: safety_factor(material.yield_strength, max_von_mises),
        solver_iterations: out.iterations,
        residual: out.rel_residual,
        reactions,
        applied_total: model.total_force(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub element: usize,
    pub centroid: Vec3,
    pub von_mises: f64,
}

/// The `k` most stressed elements, descending, ties broken by lower element
/// index.
pub fn stress_hotspots(result: &FemResult, mesh: &TetMesh, k: usize) -> Vec<Hotspot> {
    assert!(k >= 1, "k must be at least 1");
    let mut order: Vec<usize> = (0..result.element_von_mises.len()).collect();
    order.sort_by(|&a, &b| {
        result.element_von_mises[b]
            .total_cmp(&result.element_von_mises[a])
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .take(k)
        .map(|e| Hotspot {
            element: e,
            centroid: mesh.centroid(e),
            von_mises: result.element_von_mises[e],
        })
        .collect()
}
