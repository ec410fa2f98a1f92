//! Rigid transforms, pinhole projection and sweep planning.

use nalgebra::{Matrix3, Matrix4, Vector3};
use thiserror::Error;

use crate::types::{CameraModel, Twist};

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation is not orthonormal with det +1 (max deviation {0:e})")]
    NotARotation(f64),
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("first and last sweep points coincide")]
    DegenerateSpan,
    #[error("sweep speed must be positive and finite, got {0}")]
    InvalidSpeed(f64),
}

/// Rotation plus translation (meters) mapping a source frame into a target
/// frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl AffineTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let dev = rotation_deviation(&rotation);
        if dev > ORTHONORMAL_TOL || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NotARotation(dev));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rot_z(angle_rad: f64) -> Self {
        let (s, c) = angle_rad.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Homogeneous 4x4 form `[R t; 0 1]`.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// `a ∘ b`: applying the result equals applying `b` then `a`.
pub fn compose(a: &AffineTransform, b: &AffineTransform) -> AffineTransform {
    let mut rotation = a.rotation * b.rotation;
    if rotation_deviation(&rotation) > 1e-12 {
        rotation = reorthonormalize(&rotation);
    }
    AffineTransform {
        rotation,
        translation: a.rotation * b.translation + a.translation,
    }
}

fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    if ortho.is_nan() || det.is_nan() {
        f64::INFINITY
    } else {
        ortho.max(det)
    }
}

// Nearest rotation in the Frobenius sense.
fn reorthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = u * v_t;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * v_t;
    }
    out
}

/// Pinhole projection of a camera-frame point to unrounded pixel
/// coordinates.
pub fn project(point: &Vector3<f64>, cam: &CameraModel) -> Result<(f64, f64), GeometryError> {
    if point.z <= 0.0 {
        return Err(GeometryError::BehindCamera(point.z));
    }
    let x = point.x / point.z;
    let y = point.y / point.z;
    Ok((cam.fx * x + cam.skew * y + cam.u0, cam.fy * y + cam.v0))
}

/// Inverse of [`project`] onto the plane at depth `z`.
pub fn back_project(u: f64, v: f64, z: f64, cam: &CameraModel) -> Vector3<f64> {
    let y = (v - cam.v0) / cam.fy;
    let x = (u - cam.u0 - cam.skew * y) / cam.fx;
    Vector3::new(x * z, y * z, z)
}

/// Constant-speed translation from the first to the last point, zero
/// rotation.
pub fn plan_sweep_velocity(
    p_first: &Vector3<f64>,
    p_last: &Vector3<f64>,
    speed: f64,
) -> Result<Twist, GeometryError> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(GeometryError::InvalidSpeed(speed));
    }
    let span = p_last - p_first;
    let len = span.norm();
    if len < 1e-12 {
        return Err(GeometryError::DegenerateSpan);
    }
    let v = span * (speed / len);
    Ok(Twist {
        vx: v.x,
        vy: v.y,
        vz: v.z,
        ..Twist::default()
    })
}
