//! Rigid-body geometry: SE(3) poses, rotation construction from two
//! vectors, point clouds, oriented boxes and partial-view synthesis.

mod cloud;
mod obb;
mod partial_view;
pub mod spcd;

pub use cloud::{farthest_point_sample, transform_cloud, PointCloud};
pub use obb::{obb_from_cloud, OrientedBox};
pub use partial_view::{partial_view, DEFAULT_GRID};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate rotation: input vectors are zero or near-parallel")]
    DegenerateRotation,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("no visible points: object is fully occluded or behind the camera")]
    NoVisiblePoints,
}

/// A 3-vector in meters (or unitless for directions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    pub fn scale(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// 3x3 rotation matrix, row-major. Columns are the rotated basis vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix {
    pub m: [[f64; 3]; 3],
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        RotationMatrix {
            m: [
                [c0.x, c1.x, c2.x],
                [c0.y, c1.y, c2.y],
                [c0.z, c1.z, c2.z],
            ],
        }
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    /// Rotation of `angle` radians about the +z axis.
    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix {
            m: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        )
    }

    /// Applies the inverse rotation (transpose).
    pub fn apply_transpose(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.m[0][0] * v.x + self.m[1][0] * v.y + self.m[2][0] * v.z,
            self.m[0][1] * v.x + self.m[1][1] * v.y + self.m[2][1] * v.z,
            self.m[0][2] * v.x + self.m[1][2] * v.y + self.m[2][2] * v.z,
        )
    }

    pub fn compose(&self, o: &RotationMatrix) -> RotationMatrix {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        RotationMatrix { m }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max absolute deviation of R^T R from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot = self.column(i).dot(self.column(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol && (self.determinant() - 1.0).abs() <= tol
    }
}

/// A rigid transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: RotationMatrix,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        translation: Vec3::ZERO,
        rotation: RotationMatrix::IDENTITY,
    };

    pub fn new(translation: Vec3, rotation: RotationMatrix) -> Self {
        Pose { translation, rotation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Pose { translation, rotation: RotationMatrix::IDENTITY }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.apply(p).add(self.translation)
    }

    /// Maps a world point into this pose's local frame.
    pub fn apply_inverse(&self, p: Vec3) -> Vec3 {
        self.rotation.apply_transpose(p.sub(self.translation))
    }
}

/// Pinhole camera: camera-to-world pose plus intrinsics. The camera looks
/// along its local +z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub pose: Pose,
    pub focal: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraPose {
    /// Camera at `eye` looking at `target`, with `up` resolving roll.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, focal: f64, width: u32, height: u32) -> Self {
        let fwd = target.sub(eye).normalized();
        let right = fwd.cross(up).normalized();
        let down = fwd.cross(right).scale(-1.0).normalized();
        // columns: camera x (right), y (down), z (forward)
        let rotation = RotationMatrix::from_columns(right, down.scale(-1.0), fwd);
        CameraPose { pose: Pose::new(eye, rotation), focal, width, height }
    }
}

/// Builds a rotation whose columns come from Gram-Schmidt on `(a, b)`:
/// first column `normalize(a)`, second the component of `b` orthogonal to
/// it, third their cross product.
pub fn rotation_from_vectors(a: Vec3, b: Vec3) -> Result<RotationMatrix, GeometryError> {
    let na = a.norm();
    if !(na > 1e-8) || !a.is_finite() || !b.is_finite() {
        return Err(GeometryError::DegenerateRotation);
    }
    let c0 = a.scale(1.0 / na);
    let b_orth = b.sub(c0.scale(b.dot(c0)));
    let nb = b.norm();
    // sin of the angle between a and b
    if !(nb > 1e-8) || b_orth.norm() / nb <= 1e-6 {
        return Err(GeometryError::DegenerateRotation);
    }
    let c1 = b_orth.normalized();
    let c2 = c0.cross(c1);
    Ok(RotationMatrix::from_columns(c0, c1, c2))
}
