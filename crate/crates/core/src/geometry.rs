//! Rigid transforms, oriented boxes and the pinhole camera.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn det(m: &Mat3) -> f64 {
    dot(m[0], cross(m[1], m[2]))
}

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Rigid transform `p -> R p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Row-major rotation.
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose { rotation: IDENTITY3, translation: [0.0; 3] }
    }

    /// Validating constructor; the rotation must be orthonormal with det +1.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let pose = Pose { rotation, translation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        let rrt = mat_mul(&self.rotation, &transpose(&self.rotation));
        for (i, row) in rrt.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (v - expect).abs() > 1e-9 {
                    return Err(Error::InvalidPose("rotation is not orthonormal".into()));
                }
            }
        }
        if (det(&self.rotation) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPose("rotation determinant is not +1".into()));
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pose translation"));
        }
        Ok(())
    }

    /// Rotation about +Z by `yaw` radians followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vec3) -> Self {
        let (s, c) = yaw.sin_cos();
        Pose { rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]], translation }
    }

    pub fn translation(t: Vec3) -> Self {
        Pose { rotation: IDENTITY3, translation: t }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        add(mat_vec(&self.rotation, p), self.translation)
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        mat_vec(&self.rotation, v)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: mat_mul(&self.rotation, &other.rotation),
            translation: self.apply(other.translation),
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = transpose(&self.rotation);
        Pose { rotation: rt, translation: scale(mat_vec(&rt, self.translation), -1.0) }
    }
}

/// An upright box: axis-aligned in its own frame, then yawed about +Z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub center: Vec3,
    /// Extent along the box's own x (length), y (width) and z (height).
    pub size: Vec3,
    pub yaw: f64,
}

impl BoundingBox {
    pub fn world_from_box(&self) -> Pose {
        Pose::from_yaw(self.yaw, self.center)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let local = self.world_from_box().inverse().apply(p);
        local.iter().zip(self.size).all(|(v, s)| v.abs() <= 0.5 * s)
    }

    /// Axis-aligned world bounds `(min, max)`.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let (s, c) = self.yaw.sin_cos();
        let hx = 0.5 * (self.size[0] * c.abs() + self.size[1] * s.abs());
        let hy = 0.5 * (self.size[0] * s.abs() + self.size[1] * c.abs());
        let h = [hx, hy, 0.5 * self.size[2]];
        (sub(self.center, h), add(self.center, h))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Pinhole camera. Camera axes: x right, y down, z forward. Pixel centers
/// sit at integer `(u, v)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    /// Maps points of the frame's reference (ego) coordinates into camera coordinates.
    pub cam_from_world: Pose,
    /// `(width, height)` in pixels.
    pub image_size: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub valid: bool,
}

impl CameraModel {
    pub fn new(intrinsics: Intrinsics, cam_from_world: Pose, image_size: [usize; 2]) -> Result<Self> {
        let cam = CameraModel { intrinsics, cam_from_world, image_size };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let Intrinsics { fx, fy, cx, cy } = self.intrinsics;
        let [w, h] = self.image_size;
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidCamera("focal lengths must be > 0".into()));
        }
        if !(cx >= 0.0 && cx < w as f64 && cy >= 0.0 && cy < h as f64) {
            return Err(Error::InvalidCamera("principal point outside the image".into()));
        }
        self.cam_from_world.validate()
    }

    /// A camera at `position` looking horizontally along `yaw`, with the
    /// principal point at the image center.
    pub fn looking_along(yaw: f64, position: Vec3, width: usize, height: usize, hfov: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        // Rows are the camera axes expressed in the reference frame.
        let rotation = [[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]];
        let translation = scale(mat_vec(&rotation, position), -1.0);
        let fx = 0.5 * width as f64 / (0.5 * hfov).tan();
        CameraModel {
            intrinsics: Intrinsics {
                fx,
                fy: fx,
                cx: 0.5 * (width as f64 - 1.0),
                cy: 0.5 * (height as f64 - 1.0),
            },
            cam_from_world: Pose { rotation, translation },
            image_size: [width, height],
        }
    }

    pub fn width(&self) -> usize {
        self.image_size[0]
    }

    pub fn height(&self) -> usize {
        self.image_size[1]
    }

    pub fn project(&self, p: Vec3) -> Projection {
        let pc = self.cam_from_world.apply(p);
        let Intrinsics { fx, fy, cx, cy } = self.intrinsics;
        let depth = pc[2];
        if depth <= 1e-6 {
            return Projection { u: f64::NAN, v: f64::NAN, depth, valid: false };
        }
        let u = fx * pc[0] / depth + cx;
        let v = fy * pc[1] / depth + cy;
        let valid = u >= 0.0 && u < self.width() as f64 && v >= 0.0 && v < self.height() as f64;
        Projection { u, v, depth, valid }
    }

    /// World point at pixel `(u, v)` with depth measured along the optical axis.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let pc = scale(self.ray_in_camera(u, v), depth);
        self.cam_from_world.inverse().apply(pc)
    }

    /// Camera-frame ray through `(u, v)`, scaled to unit depth.
    pub fn ray_in_camera(&self, u: f64, v: f64) -> Vec3 {
        let Intrinsics { fx, fy, cx, cy } = self.intrinsics;
        [(u - cx) / fx, (v - cy) / fy, 1.0]
    }

    /// Camera center in the reference frame.
    pub fn center(&self) -> Vec3 {
        self.cam_from_world.inverse().translation
    }
}
