//! Solid primitives with closed-form ray intersection and point containment.

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundingBox, Vec3};

/// Ray hits closer than this are ignored.
pub const RAY_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Solid {
    /// Upright box, yawed about +Z. Horizontal slabs (ground, strips) are
    /// boxes with zero yaw.
    Box(BoundingBox),
    /// Vertical cylinder `[z_min, z_max]` around `(x, y)`.
    Cylinder { center: [f64; 2], radius: f64, z_min: f64, z_max: f64 },
}

impl Solid {
    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            Solid::Box(b) => b.contains(p),
            Solid::Cylinder { center, radius, z_min, z_max } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                p[2] >= *z_min && p[2] <= *z_max && dx * dx + dy * dy <= radius * radius
            }
        }
    }

    /// Smallest `t > RAY_EPS` with `origin + t * dir` on the surface.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        match self {
            Solid::Box(b) => intersect_box(b, origin, dir),
            Solid::Cylinder { center, radius, z_min, z_max } => {
                intersect_cylinder(*center, *radius, *z_min, *z_max, origin, dir)
            }
        }
    }

    /// World-axis bounds `(min, max)`.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        match self {
            Solid::Box(b) => b.aabb(),
            Solid::Cylinder { center, radius, z_min, z_max } => (
                [center[0] - radius, center[1] - radius, *z_min],
                [center[0] + radius, center[1] + radius, *z_max],
            ),
        }
    }
}

/// Entry/exit parameters of a ray against the box, via slabs in the box frame.
fn intersect_box(b: &BoundingBox, origin: Vec3, dir: Vec3) -> Option<f64> {
    let inv = b.world_from_box().inverse();
    let o = inv.apply(origin);
    let d = inv.rotate(dir);
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let half = 0.5 * b.size[axis];
        if d[axis] == 0.0 {
            if o[axis].abs() > half {
                return None;
            }
            continue;
        }
        let t1 = (-half - o[axis]) / d[axis];
        let t2 = (half - o[axis]) / d[axis];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        t_near = t_near.max(lo);
        t_far = t_far.min(hi);
    }
    if t_near > t_far {
        return None;
    }
    if t_near > RAY_EPS {
        Some(t_near)
    } else if t_far > RAY_EPS {
        Some(t_far)
    } else {
        None
    }
}

fn intersect_cylinder(c: [f64; 2], r: f64, z_min: f64, z_max: f64, origin: Vec3, dir: Vec3) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t > RAY_EPS && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    // Side wall.
    let ox = origin[0] - c[0];
    let oy = origin[1] - c[1];
    let a = dir[0] * dir[0] + dir[1] * dir[1];
    if a > 0.0 {
        let bq = 2.0 * (ox * dir[0] + oy * dir[1]);
        let cq = ox * ox + oy * oy - r * r;
        let disc = bq * bq - 4.0 * a * cq;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-bq - sq) / (2.0 * a), (-bq + sq) / (2.0 * a)] {
                let z = origin[2] + t * dir[2];
                if z >= z_min && z <= z_max {
                    consider(t);
                }
            }
        }
    }
    // Caps.
    if dir[2] != 0.0 {
        for zc in [z_min, z_max] {
            let t = (zc - origin[2]) / dir[2];
            let x = ox + t * dir[0];
            let y = oy + t * dir[1];
            if x * x + y * y <= r * r {
                consider(t);
            }
        }
    }
    best
}
