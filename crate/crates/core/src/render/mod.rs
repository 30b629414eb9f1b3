//! Deterministic software rasterizer for the review views.
//!
//! Orthographic projection fitted to the design domain, a z-buffer, flat
//! shading from a light fixed relative to the camera, and box wireframes
//! for the domain (gray), supports (green) and loads (red).

use serde::{Deserialize, Serialize};

use crate::aabb::Aabb;
use crate::geometry::SurfaceMesh;
use crate::loadcase::LoadCase;
use crate::math::{cross, dot, normalize, Vec3};

pub const MIN_VIEW_SIZE: usize = 64;
pub const DEFAULT_VIEW_SIZE: usize = 512;
/// Fraction of the projected domain added on every side.
pub const MARGIN: f64 = 0.05;

pub const BACKGROUND: [u8; 3] = [255, 255, 255];
pub const DOMAIN_COLOR: [u8; 3] = [150, 150, 150];
pub const SUPPORT_COLOR: [u8; 3] = [0, 170, 0];
pub const LOAD_COLOR: [u8; 3] = [220, 0, 0];
const GEOMETRY_GRAY: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// RGB, row-major from the top-left corner.
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(3 * width * height);
        for _ in 0..width * height {
            pixels.extend_from_slice(&fill);
        }
        Image { width, height, pixels }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn colors(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViewDirection {
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-y")]
    NegY,
    #[serde(rename = "+z")]
    PosZ,
    #[serde(rename = "-z")]
    NegZ,
    #[serde(rename = "iso")]
    Isometric,
}

impl ViewDirection {
    pub const ALL: [ViewDirection; 7] = [
        ViewDirection::PosX,
        ViewDirection::NegX,
        ViewDirection::PosY,
        ViewDirection::NegY,
        ViewDirection::PosZ,
        ViewDirection::NegZ,
        ViewDirection::Isometric,
    ];

    /// Views attached to each geometry review.
    pub const REVIEW: [ViewDirection; 4] = [
        ViewDirection::PosX,
        ViewDirection::PosY,
        ViewDirection::PosZ,
        ViewDirection::Isometric,
    ];

    /// Unit vector from the scene toward the camera.
    pub fn eye(self) -> Vec3 {
        match self {
            ViewDirection::PosX => [1.0, 0.0, 0.0],
            ViewDirection::NegX => [-1.0, 0.0, 0.0],
            ViewDirection::PosY => [0.0, 1.0, 0.0],
            ViewDirection::NegY => [0.0, -1.0, 0.0],
            ViewDirection::PosZ => [0.0, 0.0, 1.0],
            ViewDirection::NegZ => [0.0, 0.0, -1.0],
            ViewDirection::Isometric => normalize([1.0, -1.0, 1.0]),
        }
    }

    /// Suffix used in file names (`view_<tag>.ppm`).
    pub fn tag(self) -> &'static str {
        match self {
            ViewDirection::PosX => "px",
            ViewDirection::NegX => "nx",
            ViewDirection::PosY => "py",
            ViewDirection::NegY => "ny",
            ViewDirection::PosZ => "pz",
            ViewDirection::NegZ => "nz",
            ViewDirection::Isometric => "iso",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ViewDirection::PosX => "+x",
            ViewDirection::NegX => "-x",
            ViewDirection::PosY => "+y",
            ViewDirection::NegY => "-y",
            ViewDirection::PosZ => "+z",
            ViewDirection::NegZ => "-z",
            ViewDirection::Isometric => "iso",
        }
    }

    pub fn parse(s: &str) -> Option<ViewDirection> {
        Self::ALL.into_iter().find(|d| d.label() == s || d.tag() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub direction: ViewDirection,
    pub width: usize,
    pub height: usize,
    pub design_space: bool,
    pub selectors: bool,
}

impl ViewSpec {
    pub fn new(direction: ViewDirection) -> Self {
        ViewSpec {
            direction,
            width: DEFAULT_VIEW_SIZE,
            height: DEFAULT_VIEW_SIZE,
            design_space: true,
            selectors: true,
        }
    }

    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn without_overlays(mut self) -> Self {
        self.design_space = false;
        self.selectors = false;
        self
    }
}

struct Camera {
    right: Vec3,
    up: Vec3,
    eye: Vec3,
    light: Vec3,
    center: (f64, f64),
    scale: f64,
    half: (f64, f64),
}

impl Camera {
    fn new(view: &ViewSpec, fit: &Aabb) -> Camera {
        let eye = view.direction.eye();
        let world_up = if eye[2].abs() > 0.99 {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let forward = [-eye[0], -eye[1], -eye[2]];
        let right = normalize(cross(forward, world_up));
        let up = cross(right, forward);
        let light = normalize([
            0.8 * eye[0] + 0.5 * up[0] + 0.3 * right[0],
            0.8 * eye[1] + 0.5 * up[1] + 0.3 * right[1],
            0.8 * eye[2] + 0.5 * up[2] + 0.3 * right[2],
        ]);
        let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for c in fit.corners() {
            let (u, v) = (dot(c, right), dot(c, up));
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
        let du = (u1 - u0).max(1e-9) * (1.0 + 2.0 * MARGIN);
        let dv = (v1 - v0).max(1e-9) * (1.0 + 2.0 * MARGIN);
        let scale = (view.width as f64 / du).min(view.height as f64 / dv);
        Camera {
            right,
            up,
            eye,
            light,
            center: (0.5 * (u0 + u1), 0.5 * (v0 + v1)),
            scale,
            half: (0.5 * view.width as f64, 0.5 * view.height as f64),
        }
    }

    /// Pixel coordinates and depth (larger is closer to the camera).
    fn project(&self, p: Vec3) -> [f64; 3] {
        [
            self.half.0 + (dot(p, self.right) - self.center.0) * self.scale,
            self.half.1 - (dot(p, self.up) - self.center.1) * self.scale,
            dot(p, self.eye),
        ]
    }
}

fn edge(a: [f64; 3], b: [f64; 3], x: f64, y: f64) -> f64 {
    (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
}

fn shade(normal: Vec3, light: Vec3) -> [u8; 3] {
    let lambert = dot(normalize(normal), light).abs();
    let g = (GEOMETRY_GRAY * (0.3 + 0.7 * lambert)).round().clamp(0.0, 255.0) as u8;
    [g, g, g]
}

fn raster_triangle(img: &mut Image, depth: &mut [f64], p: [[f64; 3]; 3], color: [u8; 3]) {
    let area = edge(p[0], p[1], p[2][0], p[2][1]);
    if area.abs() < 1e-12 {
        return;
    }
    let xmin = p.iter().map(|q| q[0]).fold(f64::MAX, f64::min).floor().max(0.0) as usize;
    let ymin = p.iter().map(|q| q[1]).fold(f64::MAX, f64::min).floor().max(0.0) as usize;
    let xmax = p.iter().map(|q| q[0]).fold(f64::MIN, f64::max).ceil();
    let ymax = p.iter().map(|q| q[1]).fold(f64::MIN, f64::max).ceil();
    if xmax < 0.0 || ymax < 0.0 {
        return;
    }
    let xmax = (xmax as usize).min(img.width);
    let ymax = (ymax as usize).min(img.height);
    for y in ymin..ymax {
        let fy = y as f64 + 0.5;
        for x in xmin..xmax {
            let fx = x as f64 + 0.5;
            let w0 = edge(p[1], p[2], fx, fy) / area;
            let w1 = edge(p[2], p[0], fx, fy) / area;
            let w2 = edge(p[0], p[1], fx, fy) / area;
            if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                continue;
            }
            let z = w0 * p[0][2] + w1 * p[1][2] + w2 * p[2][2];
            let k = y * img.width + x;
            if z > depth[k] {
                depth[k] = z;
                img.set(x, y, color);
            }
        }
    }
}

fn draw_line(img: &mut Image, a: [f64; 3], b: [f64; 3], color: [u8; 3]) {
    let steps = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = (a[0] + t * (b[0] - a[0])).floor();
        let y = (a[1] + t * (b[1] - a[1])).floor();
        if x >= 0.0 && y >= 0.0 && (x as usize) < img.width && (y as usize) < img.height {
            img.set(x as usize, y as usize, color);
        }
    }
}

const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

fn draw_box(img: &mut Image, cam: &Camera, b: &Aabb, color: [u8; 3]) {
    let c = b.corners().map(|p| cam.project(p));
    for (i, j) in BOX_EDGES {
        draw_line(img, c[i], c[j], color);
    }
}

/// Renders `mesh` with the load-case overlays. The projection is fitted to
/// the case's design domain.
pub fn render_view(mesh: &SurfaceMesh, case: &LoadCase, view: &ViewSpec) -> Image {
    assert!(
        view.width >= MIN_VIEW_SIZE && view.height >= MIN_VIEW_SIZE,
        "views must be at least {MIN_VIEW_SIZE} pixels per side"
    );
    let cam = Camera::new(view, &case.domain);
    let mut img = Image::new(view.width, view.height, BACKGROUND);
    let mut depth = vec![f64::NEG_INFINITY; view.width * view.height];
    for t in 0..mesh.triangles.len() {
        let corners = mesh.corners(t);
        let color = shade(mesh.area_normal(t), cam.light);
        raster_triangle(&mut img, &mut depth, corners.map(|p| cam.project(p)), color);
    }
    if view.design_space {
        draw_box(&mut img, &cam, &case.domain, DOMAIN_COLOR);
    }
    if view.selectors {
        for s in case.support_selectors() {
            draw_box(&mut img, &cam, &s.query, SUPPORT_COLOR);
        }
        for s in case.load_selectors() {
            draw_box(&mut img, &cam, &s.query, LOAD_COLOR);
        }
    }
    img
}

/// The four review views at the given size.
pub fn render_review_views(mesh: &SurfaceMesh, case: &LoadCase, size: usize) -> Vec<(ViewDirection, Image)> {
    ViewDirection::REVIEW
        .iter()
        .map(|&d| (d, render_view(mesh, case, &ViewSpec::new(d).with_size(size, size))))
        .collect()
}

/// Binary PPM (P6).
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// PNG encoding for chat attachments.
pub fn encode_png(img: &Image) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("writing to a Vec cannot fail");
        w.write_image_data(&img.pixels).expect("buffer size matches the header");
    }
    out
}
