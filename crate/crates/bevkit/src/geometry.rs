//! Rigid-body transforms, quaternion algebra and Cartesian/cylindrical
//! coordinate conversion.
//!
//! All types are immutable values; every operation is pure.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Wrap an angle to the canonical range `[0, 2π)`.
pub fn wrap_to_2pi(theta: f64) -> f64 {
    let mut t = theta % TAU;
    if t < 0.0 {
        t += TAU;
    }
    // t == TAU can survive the branch above through rounding.
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_to_pi(theta: f64) -> f64 {
    let t = wrap_to_2pi(theta);
    if t > std::f64::consts::PI {
        t - TAU
    } else {
        t
    }
}

/// Unit quaternion in `(w, x, y, z)` order.
///
/// Constructors normalize, so the norm stays within 1e-9 of one after any
/// composition. `canonicalize` resolves the double cover by flipping the
/// sign so `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub fn identity() -> Self {
        Quaternion {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Build from components and normalize. The input must be nonzero.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        debug_assert!(n > 1e-12, "quaternion norm too small: {n}");
        Quaternion {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        debug_assert!(n > 1e-12, "rotation axis must be nonzero");
        let half = 0.5 * angle;
        let s = half.sin() / n;
        Quaternion::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// Shepperd's method; branches on the largest diagonal term for
    /// numerical stability near 180 degree rotations.
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let (w, x, y, z);
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = 0.25 * s;
        }
        Quaternion::new(w, x, y, z)
    }

    pub fn to_rotation_matrix(self) -> Matrix3<f64> {
        let Quaternion { w, x, y, z } = self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Hamilton product `self * other` (apply `other` first).
    pub fn multiply(self, other: Quaternion) -> Quaternion {
        let a = self;
        let b = other;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn conjugate(self) -> Quaternion {
        Quaternion {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Inverse rotation; equals the conjugate for unit quaternions.
    pub fn inverse(self) -> Quaternion {
        self.conjugate()
    }

    /// Pick the double-cover representative with `w >= 0`.
    pub fn canonicalize(self) -> Quaternion {
        if self.w < 0.0 {
            Quaternion {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    /// Rotate a vector: `q v q*` expanded via the cross-product form.
    pub fn rotate(self, v: Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(&v);
        v + self.w * t + u.cross(&t)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(self) -> f64 {
        let c = self.canonicalize();
        2.0 * c.w.clamp(-1.0, 1.0).acos()
    }

    /// Yaw about the +z axis of the frame the quaternion rotates into,
    /// i.e. the heading of the rotated +x axis in the xy-plane.
    pub fn yaw(self) -> f64 {
        let fwd = self.rotate(Vector3::x());
        fwd.y.atan2(fwd.x)
    }
}

/// Rigid SE(3) transform: rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Quaternion,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Quaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Quaternion, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    /// Compose so that the result applies `b` first, then `a`:
    /// `compose(a, b).transform_point(p) == a.transform_point(b.transform_point(p))`.
    pub fn compose(a: &Pose, b: &Pose) -> Pose {
        Pose {
            rotation: a.rotation.multiply(b.rotation),
            translation: a.rotation.rotate(b.translation) + a.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rot_inv = self.rotation.inverse();
        Pose {
            rotation: rot_inv,
            translation: -rot_inv.rotate(self.translation),
        }
    }

    pub fn transform_point(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }

    /// Rotation only; translations do not act on directions.
    pub fn transform_direction(&self, d: Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(d)
    }
}

/// Point in cylindrical coordinates: radius `rho >= 0`, azimuth
/// `theta` in `[0, 2π)`, height `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylindricalPoint {
    pub rho: f64,
    pub theta: f64,
    pub z: f64,
}

/// Convert a Cartesian point to cylindrical coordinates.
///
/// `theta = atan2(y, x)` wrapped to `[0, 2π)`; the degenerate origin
/// (`x = y = 0`) maps to `theta = 0`.
pub fn cart_to_cyl(p: Vector3<f64>) -> CylindricalPoint {
    let rho = p.x.hypot(p.y);
    let theta = if rho == 0.0 {
        0.0
    } else {
        wrap_to_2pi(p.y.atan2(p.x))
    };
    CylindricalPoint { rho, theta, z: p.z }
}

/// Inverse of [`cart_to_cyl`].
pub fn cyl_to_cart(p: &CylindricalPoint) -> Vector3<f64> {
    Vector3::new(p.rho * p.theta.cos(), p.rho * p.theta.sin(), p.z)
}
