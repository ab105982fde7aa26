//! Center-size-quaternion 3D bounding boxes.

use crate::geometry::{Pose, Quaternion};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Coordinate frame a box is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxFrame {
    /// World/georegistered frame.
    Global,
    /// Ego-vehicle frame of one sample.
    Ego,
}

/// 3D bounding box with class label and optional planar velocity.
///
/// Size is `(w, l, h)`: in the box frame, x spans the length, y the
/// width, z the height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: Vector3<f64>,
    pub frame: BoxFrame,
    /// `(width, length, height)` in meters, all positive.
    pub size: [f64; 3],
    pub orientation: Quaternion,
    pub category: String,
    /// Planar `(vx, vy)` velocity in the box's frame, m/s.
    pub velocity: Option<[f64; 2]>,
    /// Visible fraction in `[0, 1]`.
    pub visibility: f64,
}

impl Box3D {
    /// Re-express a global-frame box in the ego frame of `ego_pose`
    /// (the pose mapping ego coordinates to global coordinates).
    /// Center, orientation and velocity transform rigidly; size is
    /// untouched.
    pub fn into_ego(&self, ego_pose: &Pose) -> Box3D {
        debug_assert_eq!(self.frame, BoxFrame::Global);
        let inv = ego_pose.inverse();
        let velocity = self.velocity.map(|v| {
            let rotated = inv.rotation.rotate(Vector3::new(v[0], v[1], 0.0));
            [rotated.x, rotated.y]
        });
        Box3D {
            center: inv.transform_point(self.center),
            frame: BoxFrame::Ego,
            size: self.size,
            orientation: inv.rotation.multiply(self.orientation).canonicalize(),
            category: self.category.clone(),
            velocity,
            visibility: self.visibility,
        }
    }

    /// Box-frame half extents along (x, y, z) = (l/2, w/2, h/2).
    fn half_extents(&self) -> Vector3<f64> {
        Vector3::new(self.size[1] / 2.0, self.size[0] / 2.0, self.size[2] / 2.0)
    }

    /// The eight corners in the box's own frame.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let h = self.half_extents();
        let mut out = [Vector3::zeros(); 8];
        let mut i = 0;
        for &sx in &[-1.0, 1.0] {
            for &sy in &[-1.0, 1.0] {
                for &sz in &[-1.0, 1.0] {
                    out[i] = self.center
                        + self
                            .orientation
                            .rotate(Vector3::new(sx * h.x, sy * h.y, sz * h.z));
                    i += 1;
                }
            }
        }
        out
    }

    /// Interior test for a point expressed in the box's frame.
    pub fn contains(&self, p: Vector3<f64>) -> bool {
        let local = self.orientation.inverse().rotate(p - self.center);
        let h = self.half_extents();
        local.x.abs() <= h.x && local.y.abs() <= h.y && local.z.abs() <= h.z
    }

    /// Heading of the box's +x axis in the xy-plane, radians.
    pub fn yaw(&self) -> f64 {
        self.orientation.yaw()
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.size.iter().any(|&s| s <= 0.0 || s.is_nan()) {
            return Err(crate::Error::Config(format!(
                "box size components must be positive: {:?}",
                self.size
            )));
        }
        if (self.orientation.norm() - 1.0).abs() > 1e-9 {
            return Err(crate::Error::Config("box quaternion must be unit".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_box() -> Box3D {
        Box3D {
            center: Vector3::new(10.0, 5.0, 1.0),
            frame: BoxFrame::Global,
            size: [1.8, 4.5, 1.6],
            orientation: Quaternion::from_axis_angle(Vector3::z(), 0.5),
            category: "car".into(),
            velocity: Some([3.0, 0.0]),
            visibility: 1.0,
        }
    }

    #[test]
    fn contains_center_and_rejects_outside() {
        let b = sample_box();
        assert!(b.contains(b.center));
        assert!(!b.contains(b.center + Vector3::new(10.0, 0.0, 0.0)));
        // Just inside the long axis end.
        let tip = b.center + b.orientation.rotate(Vector3::new(2.2, 0.0, 0.0));
        assert!(b.contains(tip));
        let beyond = b.center + b.orientation.rotate(Vector3::new(2.3, 0.0, 0.0));
        assert!(!b.contains(beyond));
    }

    #[test]
    fn rigid_transform_preserves_shape() {
        let b = sample_box();
        let ego = Pose::new(
            Quaternion::from_axis_angle(Vector3::z(), 1.1),
            Vector3::new(7.0, -2.0, 0.3),
        );
        let e = b.into_ego(&ego);
        assert_eq!(e.frame, BoxFrame::Ego);
        assert_eq!(e.size, b.size);
        let ca = b.corners();
        let cb = e.corners();
        for i in 0..8 {
            for j in (i + 1)..8 {
                let da = (ca[i] - ca[j]).norm();
                let db = (cb[i] - cb[j]).norm();
                assert!(
                    (da - db).abs() < 1e-9,
                    "corner distance changed: {da} vs {db}"
                );
            }
        }
        // Round trip through the inverse lands back on the global center.
        let back = ego.transform_point(e.center);
        assert_relative_eq!(back, b.center, epsilon = 1e-9);
    }

    #[test]
    fn velocity_rotates_with_frame() {
        let b = sample_box();
        let ego = Pose::new(
            Quaternion::from_axis_angle(Vector3::z(), std::f64::consts::FRAC_PI_2),
            Vector3::zeros(),
        );
        let e = b.into_ego(&ego);
        let v = e.velocity.unwrap();
        // Global (3, 0) seen from a frame rotated +90 deg is (0, -3).
        assert_relative_eq!(v[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(v[1], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn yaw_reads_heading() {
        let b = sample_box();
        assert_relative_eq!(b.yaw(), 0.5, epsilon = 1e-12);
    }
}
