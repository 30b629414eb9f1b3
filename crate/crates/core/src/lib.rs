//! Physics-in-the-loop generative CAD.
//!
//! Load cases describe a design domain, spatial selectors, supports and
//! loads. Geometry programs are CSG trees sampled onto a voxel grid, meshed
//! into linear tetrahedra and checked with a linear-elastic solve.

pub mod aabb;
pub mod agentloop;
pub mod bench;
pub mod fem;
pub mod geometry;
pub mod loadcase;
pub mod math;
pub mod meshing;
pub mod metrics;
pub mod render;
pub mod validators;
