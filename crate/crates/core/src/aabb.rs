use serde::{Deserialize, Serialize};

use crate::math::Vec3;

/// Axis-aligned box in millimetres.
///
/// Serializes with the load-case key layout (`x_min`, `x_max`, ...). Zero
/// extent along an axis is legal and describes planes, lines or points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "BoundsDoc", into = "BoundsDoc")]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BoundsDoc {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    z_min: f64,
    z_max: f64,
}

impl From<BoundsDoc> for Aabb {
    fn from(b: BoundsDoc) -> Self {
        Aabb {
            min: [b.x_min, b.y_min, b.z_min],
            max: [b.x_max, b.y_max, b.z_max],
        }
    }
}

impl From<Aabb> for BoundsDoc {
    fn from(b: Aabb) -> Self {
        BoundsDoc {
            x_min: b.min[0],
            x_max: b.max[0],
            y_min: b.min[1],
            y_max: b.max[1],
            z_min: b.min[2],
            z_max: b.max[2],
        }
    }
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    /// An inverted box that any `include` call will replace.
    pub fn empty() -> Self {
        Aabb {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn extent(&self) -> Vec3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn center(&self) -> Vec3 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e[0].max(0.0) * e[1].max(0.0) * e[2].max(0.0)
    }

    pub fn longest_extent(&self) -> f64 {
        let e = self.extent();
        e[0].max(e[1]).max(e[2])
    }

    /// True when `min <= max` on every axis.
    pub fn is_valid(&self) -> bool {
        (0..3).all(|a| self.min[a] <= self.max[a])
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn inflate(&self, by: f64) -> Aabb {
        Aabb {
            min: [self.min[0] - by, self.min[1] - by, self.min[2] - by],
            max: [self.max[0] + by, self.max[1] + by, self.max[2] + by],
        }
    }

    /// Closed-set intersection; touching faces count as intersecting.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] <= other.max[a] && other.min[a] <= self.max[a])
    }

    pub fn intersection(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = self.min[a].max(other.min[a]);
            out.max[a] = self.max[a].min(other.max[a]);
        }
        out
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = self.min[a].min(other.min[a]);
            out.max[a] = self.max[a].max(other.max[a]);
        }
        out
    }

    pub fn include(&mut self, p: Vec3) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn scaled(&self, s: f64) -> Aabb {
        Aabb {
            min: [self.min[0] * s, self.min[1] * s, self.min[2] * s],
            max: [self.max[0] * s, self.max[1] * s, self.max[2] * s],
        }
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            [a[0], a[1], a[2]],
            [b[0], a[1], a[2]],
            [a[0], b[1], a[2]],
            [b[0], b[1], a[2]],
            [a[0], a[1], b[2]],
            [b[0], a[1], b[2]],
            [a[0], b[1], b[2]],
            [b[0], b[1], b[2]],
        ]
    }
}
