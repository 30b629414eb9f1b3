//! Voxelization, connectivity labeling and conforming tet4 meshing.
//!
//! Geometry is sampled at voxel centres onto a uniform cubic grid. Each
//! occupied voxel is split into six tetrahedra around its main diagonal
//! (Kuhn subdivision). Every voxel uses the same split, so the two triangles
//! on any shared voxel face coincide and the mesh is conforming without
//! parity bookkeeping. Nodes live on the lattice and are deduplicated by
//! lattice index.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aabb::Aabb;
use crate::geometry::SurfaceMesh;
use crate::loadcase::SpatialSelector;
use crate::math::{triple, Vec3};

/// Default voxels along the longest domain axis.
pub const DEFAULT_RESOLUTION: usize = 48;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("no occupied voxels to mesh")]
    EmptyGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn empty(origin: Vec3, spacing: f64, dims: [usize; 3]) -> Self {
        assert!(spacing > 0.0, "voxel spacing must be positive");
        VoxelGrid {
            origin,
            spacing,
            dims,
            occupancy: vec![false; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn center(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        let s = self.spacing;
        [
            self.origin[0] + (c[0] as f64 + 0.5) * s,
            self.origin[1] + (c[1] as f64 + 0.5) * s,
            self.origin[2] + (c[2] as f64 + 0.5) * s,
        ]
    }

    pub fn is_occupied(&self, idx: usize) -> bool {
        self.occupancy[idx]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.index(i, j, k);
        self.occupancy[idx] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupancy.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    pub fn occupied_volume(&self) -> f64 {
        self.occupied_count() as f64 * self.voxel_volume()
    }

    pub fn bounds(&self) -> Aabb {
        let s = self.spacing;
        Aabb::new(
            self.origin,
            [
                self.origin[0] + self.dims[0] as f64 * s,
                self.origin[1] + self.dims[1] as f64 * s,
                self.origin[2] + self.dims[2] as f64 * s,
            ],
        )
    }

    /// Six face neighbours of voxel `idx` that lie inside the grid.
    pub fn face_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let [i, j, k] = self.coords(idx);
        let d = self.dims;
        let cand = [
            (i > 0).then(|| self.index(i - 1, j, k)),
            (i + 1 < d[0]).then(|| self.index(i + 1, j, k)),
            (j > 0).then(|| self.index(i, j - 1, k)),
            (j + 1 < d[1]).then(|| self.index(i, j + 1, k)),
            (k > 0).then(|| self.index(i, j, k - 1)),
            (k + 1 < d[2]).then(|| self.index(i, j, k + 1)),
        ];
        cand.into_iter().flatten()
    }

    /// Occupied voxels with a corner within half a spacing of `region`, the
    /// same reach as node selection at the default tolerance. Equivalently,
    /// centres in `region` inflated by one spacing.
    pub fn voxels_in(&self, region: &Aabb) -> Vec<usize> {
        let probe = region.inflate(self.spacing * (1.0 + 1e-9));
        self.occupied().filter(|&v| probe.contains(self.center(v))).collect()
    }
}

/// Voxel count per axis covering `bounds` with cubic voxels of edge
/// `longest extent / resolution`.
pub fn grid_dims(bounds: &Aabb, resolution: usize) -> (f64, [usize; 3]) {
    let spacing = bounds.longest_extent() / resolution as f64;
    let ext = bounds.extent();
    let dims = ext.map(|e| ((e / spacing) - 1e-9).ceil().max(1.0) as usize);
    (spacing, dims)
}

/// Samples `inside` at every voxel centre of a grid whose origin is
/// `bounds.min` and whose longest axis has `resolution` voxels.
pub fn voxelize(inside: &(dyn Fn(Vec3) -> bool + Sync), bounds: &Aabb, resolution: usize) -> VoxelGrid {
    assert!(resolution >= 1, "resolution must be positive");
    let (spacing, dims) = grid_dims(bounds, resolution);
    voxelize_grid(inside, bounds.min, spacing, dims)
}

/// Samples `inside` on an explicit grid.
pub fn voxelize_grid(
    inside: &(dyn Fn(Vec3) -> bool + Sync),
    origin: Vec3,
    spacing: f64,
    dims: [usize; 3],
) -> VoxelGrid {
    let mut grid = VoxelGrid::empty(origin, spacing, dims);
    let slab = dims[0] * dims[1];
    if slab == 0 {
        return grid;
    }
    let template = grid.clone_shape();
    grid.occupancy.par_chunks_mut(slab).enumerate().for_each(|(k, chunk)| {
        for (off, cell) in chunk.iter_mut().enumerate() {
            *cell = inside(template.center(k * slab + off));
        }
    });
    grid
}

impl VoxelGrid {
    fn clone_shape(&self) -> VoxelGrid {
        VoxelGrid {
            origin: self.origin,
            spacing: self.spacing,
            dims: self.dims,
            occupancy: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Connectivity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLabeling {
    /// Per voxel: component id, or `None` for empty voxels.
    pub labels: Vec<Option<u32>>,
    pub count: usize,
}

impl ComponentLabeling {
    pub fn label(&self, voxel: usize) -> Option<usize> {
        self.labels[voxel].map(|l| l as usize)
    }

    /// Voxel count of each component.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for l in self.labels.iter().flatten() {
            sizes[*l as usize] += 1;
        }
        sizes
    }
}

/// Face-neighbour (6-connected) flood labeling. Ids follow the order of each
/// component's lowest voxel index.
pub fn connected_components(grid: &VoxelGrid) -> ComponentLabeling {
    let mut labels: Vec<Option<u32>> = vec![None; grid.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if !grid.occupancy[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(count);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for n in grid.face_neighbors(v) {
                if grid.occupancy[n] && labels[n].is_none() {
                    labels[n] = Some(count);
                    queue.push_back(n);
                }
            }
        }
        count += 1;
    }
    ComponentLabeling {
        labels,
        count: count as usize,
    }
}

// ---------------------------------------------------------------------------
// Tetrahedralization

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TetMesh {
    pub nodes: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    /// Source voxel (grid index) of each tet.
    pub element_voxel: Vec<usize>,
    /// Lattice spacing the mesh was built with, 0 for meshes not built from
    /// a grid.
    #[serde(default)]
    pub spacing: f64,
}

// Cube corner offsets indexed by bit pattern (x = bit 0, y = bit 1, z = bit 2).
const CORNER: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// The six Kuhn tetrahedra: walks from corner 0 to corner 7 adding one axis
/// at a time, one walk per axis permutation.
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7], // x y z
    [0, 1, 5, 7], // x z y
    [0, 2, 3, 7], // y x z
    [0, 2, 6, 7], // y z x
    [0, 4, 5, 7], // z x y
    [0, 4, 6, 7], // z y x
];

impl TetMesh {
    pub fn tet_corners(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|n| self.nodes[n])
    }

    pub fn signed_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tet_corners(t);
        triple(a, b, c, d) / 6.0
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.signed_volume(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let c = self.tet_corners(t);
        let mut out = [0.0; 3];
        for p in c {
            for a in 0..3 {
                out[a] += 0.25 * p[a];
            }
        }
        out
    }

    /// Ids of nodes that appear on the boundary surface, ascending.
    pub fn surface_nodes(&self) -> Vec<usize> {
        let mut on = vec![false; self.nodes.len()];
        for f in boundary_faces(self) {
            for n in f {
                on[n] = true;
            }
        }
        on.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }

    /// Debug dump of nodes and tets as JSON arrays.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "nodes": self.nodes, "tets": self.tets }).to_string()
    }
}

/// Splits every occupied voxel into six positively oriented tetrahedra.
pub fn tetrahedralize(grid: &VoxelGrid) -> Result<TetMesh, MeshError> {
    let [nx, ny, _] = grid.dims;
    let lattice = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut node_of: HashMap<usize, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut tets = Vec::new();
    let mut element_voxel = Vec::new();
    let s = grid.spacing;
    for v in grid.occupied() {
        let [i, j, k] = grid.coords(v);
        let mut ids = [0usize; 8];
        for (c, off) in CORNER.iter().enumerate() {
            let (ci, cj, ck) = (i + off[0], j + off[1], k + off[2]);
            let key = lattice(ci, cj, ck);
            ids[c] = *node_of.entry(key).or_insert_with(|| {
                nodes.push([
                    grid.origin[0] + ci as f64 * s,
                    grid.origin[1] + cj as f64 * s,
                    grid.origin[2] + ck as f64 * s,
                ]);
                nodes.len() - 1
            });
        }
        for walk in KUHN {
            let mut t = walk.map(|c| ids[c]);
            let vol = triple(nodes[t[0]], nodes[t[1]], nodes[t[2]], nodes[t[3]]);
            if vol < 0.0 {
                t.swap(2, 3);
            }
            tets.push(t);
            element_voxel.push(v);
        }
    }
    if tets.is_empty() {
        return Err(MeshError::EmptyGeometry);
    }
    Ok(TetMesh {
        nodes,
        tets,
        element_voxel,
        spacing: s,
    })
}

/// Outward faces of a positively oriented tet `abcd`.
fn tet_faces(t: [usize; 4]) -> [[usize; 3]; 4] {
    let [a, b, c, d] = t;
    [[a, c, b], [a, b, d], [a, d, c], [b, c, d]]
}

fn face_key(f: [usize; 3]) -> [usize; 3] {
    let mut k = f;
    k.sort_unstable();
    k
}

/// Tet faces that occur exactly once, with outward winding, in element
/// order.
pub(crate) fn boundary_faces(mesh: &TetMesh) -> Vec<[usize; 3]> {
    let mut count: HashMap<[usize; 3], u32> = HashMap::with_capacity(mesh.tets.len() * 2);
    for t in &mesh.tets {
        for f in tet_faces(*t) {
            *count.entry(face_key(f)).or_insert(0) += 1;
        }
    }
    let mut out = Vec::new();
    for t in &mesh.tets {
        for f in tet_faces(*t) {
            if count[&face_key(f)] == 1 {
                out.push(f);
            }
        }
    }
    out
}

/// Boundary triangles of the tet mesh, outward oriented, with compacted
/// vertex indices.
pub fn surface_mesh(mesh: &TetMesh) -> SurfaceMesh {
    let faces = boundary_faces(mesh);
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let triangles = faces
        .into_iter()
        .map(|f| {
            f.map(|n| {
                *remap.entry(n).or_insert_with(|| {
                    vertices.push(mesh.nodes[n]);
                    vertices.len() - 1
                })
            })
        })
        .collect();
    SurfaceMesh { vertices, triangles }
}

/// Half the mesh spacing, or zero for meshes without a lattice.
pub fn default_tolerance(mesh: &TetMesh) -> f64 {
    0.5 * mesh.spacing
}

/// Nodes inside the selector box inflated by `tolerance` on every face,
/// ascending.
pub fn select_nodes(mesh: &TetMesh, selector: &SpatialSelector, tolerance: f64) -> Vec<usize> {
    assert!(tolerance >= 0.0, "tolerance must be non-negative");
    // guard against the half-spacing tolerance landing exactly on a lattice
    // plane after rounding
    let probe = selector.query.inflate(tolerance * (1.0 + 1e-9) + 1e-12);
    mesh.nodes
        .iter()
        .enumerate()
        .filter_map(|(i, p)| probe.contains(*p).then_some(i))
        .collect()
}
