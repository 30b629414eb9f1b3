//! Deterministic design checks and the stage pipeline that runs them.
//!
//! A design is evaluated in a fixed order: compile, design space, fix
//! area, load area, connectivity, mesh, FEA. The first failing stage names
//! the verdict. A design-space violation still lets the solve run so the
//! physics numbers are available, but the verdict stays failed.

use serde::{Deserialize, Serialize};

use crate::aabb::Aabb;
use crate::fem::{build_model, solve_with, stress_hotspots, CgSettings, FemError, FemResult, Hotspot, Material};
use crate::geometry::{count_faces, GeometryError, GeometryProgram, MeshClassifier, SurfaceMesh, DEFAULT_CREASE_ANGLE};
use crate::loadcase::{LoadCase, SpatialSelector};
use crate::math::Vec3;
use crate::meshing::{
    connected_components, default_tolerance, surface_mesh, tetrahedralize, voxelize_grid, ComponentLabeling, TetMesh,
    VoxelGrid, DEFAULT_RESOLUTION,
};

/// Lower and upper safety factor bounds of the target band.
pub const DEFAULT_SF_RANGE: (f64, f64) = (2.0, 5.0);
/// Stress hotspots passed back as feedback.
pub const HOTSPOT_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureCategory {
    /// Program could not be extracted, parsed or sampled.
    Compile,
    DesignSpace,
    FixArea,
    LoadArea,
    Connectivity,
    /// No elements could be generated.
    Mesh,
    #[serde(rename = "FEA")]
    Fea,
}

impl FailureCategory {
    /// The five categories of the failure-type chart.
    pub const TAXONOMY: [FailureCategory; 5] = [
        FailureCategory::DesignSpace,
        FailureCategory::Connectivity,
        FailureCategory::Fea,
        FailureCategory::LoadArea,
        FailureCategory::FixArea,
    ];

    pub fn in_taxonomy(self) -> bool {
        Self::TAXONOMY.contains(&self)
    }

    pub fn label(self) -> &'static str {
        match self {
            FailureCategory::Compile => "Compile",
            FailureCategory::DesignSpace => "Design Space",
            FailureCategory::FixArea => "Fix Area",
            FailureCategory::LoadArea => "Load Area",
            FailureCategory::Connectivity => "Connectivity",
            FailureCategory::Mesh => "Mesh",
            FailureCategory::Fea => "FEA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "category")]
pub enum Verdict {
    Valid,
    Failed(FailureCategory),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SfBand {
    Under,
    Target,
    Over,
}

pub fn sf_band(sf: f64, range: (f64, f64)) -> SfBand {
    if sf < range.0 {
        SfBand::Under
    } else if sf > range.1 {
        SfBand::Over
    } else {
        SfBand::Target
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpaceCheck {
    pub violated: bool,
    /// mm³
    pub outside_volume: f64,
    /// Outside volume over the design-domain box volume.
    pub violation_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityCheck {
    pub component_count: usize,
    pub all_regions_connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaCheck {
    pub succeeded: bool,
    pub safety_factor: Option<f64>,
    pub max_von_mises: Option<f64>,
    pub in_target_range: bool,
    pub band: Option<SfBand>,
    pub solver_iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub compile_ok: bool,
    pub compile_error: Option<String>,
    pub design_space: Option<DesignSpaceCheck>,
    pub connectivity: Option<ConnectivityCheck>,
    pub fix_area_ok: Option<bool>,
    pub load_area_ok: Option<bool>,
    /// Selectors with no material, by id.
    pub empty_regions: Vec<String>,
    pub meshable: Option<bool>,
    pub fea: Option<FeaCheck>,
    /// mm³
    pub volume: Option<f64>,
    pub face_count: Option<usize>,
    pub verdict: Verdict,
}

impl ValidationReport {
    /// Checks pass and the safety factor is inside the target band.
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Valid && self.fea.as_ref().is_some_and(|f| f.in_target_range)
    }

    pub fn failure(&self) -> Option<FailureCategory> {
        match self.verdict {
            Verdict::Valid => None,
            Verdict::Failed(c) => Some(c),
        }
    }

    pub fn safety_factor(&self) -> Option<f64> {
        self.fea.as_ref().and_then(|f| f.safety_factor)
    }

    pub fn mesh_ok(&self) -> bool {
        self.meshable == Some(true)
    }

    pub fn fea_ok(&self) -> bool {
        self.fea.as_ref().is_some_and(|f| f.succeeded)
    }
}

/// Material outside the domain box or inside a keep-out region.
pub fn check_design_space(grid: &VoxelGrid, domain: &Aabb, keep_out: &[Aabb]) -> DesignSpaceCheck {
    let outside = grid
        .occupied()
        .filter(|&v| {
            let c = grid.center(v);
            !domain.contains(c) || keep_out.iter().any(|k| k.contains(c))
        })
        .count();
    let outside_volume = outside as f64 * grid.voxel_volume();
    DesignSpaceCheck {
        violated: outside > 0,
        outside_volume,
        violation_ratio: outside_volume / domain.volume(),
    }
}

/// At least one occupied voxel has a corner node that node selection at
/// the default tolerance would pick up.
pub fn check_region_coverage(grid: &VoxelGrid, selector: &SpatialSelector) -> bool {
    !grid.voxels_in(&selector.query).is_empty()
}

/// Every region holds material and all region voxels share one component.
pub fn check_connectivity(labeling: &ComponentLabeling, regions: &[Vec<usize>]) -> ConnectivityCheck {
    let mut label = None;
    let mut connected = !regions.is_empty();
    for region in regions {
        if region.is_empty() {
            connected = false;
            break;
        }
        for &v in region {
            let l = labeling.label(v);
            match (label, l) {
                (_, None) => connected = false,
                (None, Some(l)) => label = Some(l),
                (Some(a), Some(b)) if a != b => connected = false,
                _ => {}
            }
        }
    }
    ConnectivityCheck {
        component_count: labeling.count,
        all_regions_connected: connected,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Voxels along the longest domain axis.
    pub resolution: usize,
    pub material: Material,
    pub sf_range: (f64, f64),
    pub solver: CgSettings,
    pub crease_angle: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            resolution: DEFAULT_RESOLUTION,
            material: Material::default(),
            sf_range: DEFAULT_SF_RANGE,
            solver: CgSettings::default(),
            crease_angle: DEFAULT_CREASE_ANGLE,
        }
    }
}

/// Grid over the domain plus a margin of at least 10% per axis and one
/// voxel, with voxel faces aligned to the domain's minimum corner.
pub fn design_grid(domain: &Aabb, resolution: usize) -> VoxelGrid {
    assert!(resolution >= 1);
    let spacing = domain.longest_extent() / resolution as f64;
    let ext = domain.extent();
    let mut origin = [0.0; 3];
    let mut dims = [0; 3];
    for a in 0..3 {
        let cells = ((ext[a] / spacing) - 1e-9).ceil().max(1.0) as usize;
        let margin = (0.1 * ext[a] / spacing).ceil() as usize + 1;
        origin[a] = domain.min[a] - margin as f64 * spacing;
        dims[a] = cells + 2 * margin;
    }
    VoxelGrid::empty(origin, spacing, dims)
}

/// Outcomes of each stage; `None` marks a stage that was not reached.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutcomes {
    pub compile_error: Option<String>,
    pub design_space: Option<DesignSpaceCheck>,
    pub fix_coverage: Option<Vec<(String, bool)>>,
    pub load_coverage: Option<Vec<(String, bool)>>,
    pub connectivity: Option<ConnectivityCheck>,
    pub meshable: Option<bool>,
    pub fea: Option<Result<(f64, f64, usize), String>>,
    pub volume: Option<f64>,
    pub face_count: Option<usize>,
}

/// Aggregates stage outcomes into a report. The first failing stage, in
/// pipeline order, is the verdict.
pub fn validate(s: &StageOutcomes, sf_range: (f64, f64)) -> ValidationReport {
    let compile_ok = s.compile_error.is_none();
    let all_ok = |c: &Option<Vec<(String, bool)>>| c.as_ref().map(|v| v.iter().all(|(_, ok)| *ok));
    let fix_area_ok = all_ok(&s.fix_coverage);
    let load_area_ok = all_ok(&s.load_coverage);
    let empty_regions = [&s.fix_coverage, &s.load_coverage]
        .into_iter()
        .flatten()
        .flatten()
        .filter(|(_, ok)| !ok)
        .map(|(id, _)| id.clone())
        .collect();
    let fea = s.fea.as_ref().map(|r| match r {
        Ok((sf, vm, iters)) => {
            let band = sf_band(*sf, sf_range);
            FeaCheck {
                succeeded: true,
                safety_factor: Some(*sf),
                max_von_mises: Some(*vm),
                in_target_range: band == SfBand::Target,
                band: Some(band),
                solver_iterations: Some(*iters),
                error: None,
            }
        }
        Err(e) => FeaCheck {
            succeeded: false,
            safety_factor: None,
            max_von_mises: None,
            in_target_range: false,
            band: None,
            solver_iterations: None,
            error: Some(e.clone()),
        },
    });
    use FailureCategory as F;
    let stages = [
        (compile_ok, F::Compile),
        (s.design_space.is_some_and(|d| !d.violated), F::DesignSpace),
        (fix_area_ok == Some(true), F::FixArea),
        (load_area_ok == Some(true), F::LoadArea),
        (s.connectivity.is_some_and(|c| c.all_regions_connected), F::Connectivity),
        (s.meshable == Some(true), F::Mesh),
        (fea.as_ref().is_some_and(|f| f.succeeded), F::Fea),
    ];
    let verdict = stages
        .iter()
        .find(|(ok, _)| !ok)
        .map_or(Verdict::Valid, |&(_, c)| Verdict::Failed(c));
    ValidationReport {
        compile_ok,
        compile_error: s.compile_error.clone(),
        design_space: s.design_space,
        connectivity: s.connectivity,
        fix_area_ok,
        load_area_ok,
        empty_regions,
        meshable: s.meshable,
        fea,
        volume: s.volume,
        face_count: s.face_count,
        verdict,
    }
}

/// Everything produced while evaluating one design.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: ValidationReport,
    pub grid: Option<VoxelGrid>,
    pub mesh: Option<TetMesh>,
    pub surface: Option<SurfaceMesh>,
    pub fem: Option<FemResult>,
    pub hotspots: Vec<Hotspot>,
}

impl Evaluation {
    fn compile_failure(message: String, sf_range: (f64, f64)) -> Evaluation {
        let outcomes = StageOutcomes {
            compile_error: Some(message),
            ..StageOutcomes::default()
        };
        Evaluation {
            report: validate(&outcomes, sf_range),
            grid: None,
            mesh: None,
            surface: None,
            fem: None,
            hotspots: Vec::new(),
        }
    }
}

pub fn evaluate_program(program: &GeometryProgram, case: &LoadCase, config: &PipelineConfig) -> Evaluation {
    evaluate_occupancy(&|p| program.contains(p), case, config)
}

/// Evaluates program source text; unparseable text is a compile failure.
pub fn evaluate_source(source: &str, case: &LoadCase, config: &PipelineConfig) -> Evaluation {
    match GeometryProgram::from_json(source) {
        Ok(p) => evaluate_program(&p, case, config),
        Err(e) => Evaluation::compile_failure(e.to_string(), config.sf_range),
    }
}

/// Evaluates an exported triangle mesh; an open or malformed mesh is a
/// compile failure.
pub fn evaluate_surface(mesh: &SurfaceMesh, case: &LoadCase, config: &PipelineConfig) -> Evaluation {
    match MeshClassifier::new(mesh) {
        Ok(c) => evaluate_occupancy(&|p| c.contains(p), case, config),
        Err(e) => Evaluation::compile_failure(e.to_string(), config.sf_range),
    }
}

pub fn evaluate_stl(bytes: &[u8], case: &LoadCase, config: &PipelineConfig) -> Evaluation {
    match crate::geometry::load_stl(bytes) {
        Ok(m) => evaluate_surface(&m, case, config),
        Err(e) => Evaluation::compile_failure(e.to_string(), config.sf_range),
    }
}

pub fn evaluate_occupancy(
    inside: &(dyn Fn(Vec3) -> bool + Sync),
    case: &LoadCase,
    config: &PipelineConfig,
) -> Evaluation {
    let shape = design_grid(&case.domain, config.resolution);
    let grid = voxelize_grid(inside, shape.origin, shape.spacing, shape.dims);
    let mut s = StageOutcomes::default();
    if grid.occupied_count() == 0 {
        let mut e = Evaluation::compile_failure(GeometryError::EmptyGeometry.to_string(), config.sf_range);
        e.grid = Some(grid);
        return e;
    }
    s.volume = Some(grid.occupied_volume());
    s.design_space = Some(check_design_space(&grid, &case.domain, &case.keep_out));

    let coverage = |sels: Vec<&SpatialSelector>| -> Vec<(String, bool)> {
        sels.into_iter()
            .map(|sel| (sel.id.clone(), check_region_coverage(&grid, sel)))
            .collect()
    };
    let fix = coverage(case.support_selectors());
    let load = coverage(case.load_selectors());
    let covered = fix.iter().chain(&load).all(|(_, ok)| *ok);
    s.fix_coverage = Some(fix);
    s.load_coverage = Some(load);

    let labeling = connected_components(&grid);
    let regions: Vec<Vec<usize>> = case
        .support_selectors()
        .into_iter()
        .chain(case.load_selectors())
        .map(|sel| grid.voxels_in(&sel.query))
        .collect();
    let connectivity = check_connectivity(&labeling, &regions);
    s.connectivity = Some(connectivity);

    let mesh = tetrahedralize(&grid).ok();
    s.meshable = Some(mesh.is_some());
    let surface = mesh.as_ref().map(surface_mesh);
    s.face_count = surface.as_ref().map(|m| count_faces(m, config.crease_angle));

    let mut fem = None;
    let mut hotspots = Vec::new();
    if let (Some(m), true, true) = (&mesh, covered, connectivity.all_regions_connected) {
        let solved = build_model(m, case, default_tolerance(m))
            .and_then(|model| solve_with(&model, &config.material, &config.solver));
        match solved {
            Ok(r) => {
                s.fea = Some(Ok((r.safety_factor, r.max_von_mises, r.solver_iterations)));
                hotspots = stress_hotspots(&r, m, HOTSPOT_COUNT);
                fem = Some(r);
            }
            Err(e) => {
                // node-level selection can still come up empty when voxel
                // coverage passed
                let (list, id) = match &e {
                    FemError::FixAreaEmpty(id) => (&mut s.fix_coverage, id),
                    FemError::LoadAreaEmpty(id) => (&mut s.load_coverage, id),
                    _ => (&mut None, &String::new()),
                };
                for entry in list.iter_mut().flatten() {
                    if &entry.0 == id {
                        entry.1 = false;
                    }
                }
                s.fea = Some(Err(e.to_string()));
            }
        }
    }
    Evaluation {
        report: validate(&s, config.sf_range),
        grid: Some(grid),
        mesh,
        surface,
        fem,
        hotspots,
    }
}
