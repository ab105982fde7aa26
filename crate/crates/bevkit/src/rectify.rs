//! Virtual pinhole views synthesized from fisheye cameras.
//!
//! Each fisheye spawns a forward-facing (+30 deg yaw) and a backward-facing
//! (-46 deg yaw) virtual pinhole, both pitched -4 deg downward, sharing the
//! fisheye optical center. Together with two stereo pinholes this yields a
//! six-camera rig with full horizontal coverage.
//!
//! Remapping works per target pixel: unproject through the virtual
//! pinhole, rotate the ray into the fisheye frame via the mount, project
//! with the unified model. Out-of-hemisphere rays become invalid entries,
//! which are data rather than errors.

use crate::camera::MeiCamera;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Quaternion};
use crate::wire;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};

/// Yaw of the forward-facing virtual view, degrees.
pub const FORWARD_YAW_DEG: f64 = 30.0;
/// Yaw of the backward-facing virtual view, degrees.
pub const BACKWARD_YAW_DEG: f64 = -46.0;
/// Downward pitch shared by both virtual views, degrees.
pub const VIRTUAL_PITCH_DEG: f64 = -4.0;

const REMAP_MAGIC: &[u8; 8] = b"BEVRMAP1";

/// Pinhole camera mounted at a fixed rotation relative to a physical
/// fisheye camera. The mount pose maps virtual-camera coordinates into
/// fisheye-camera coordinates (rotation only; the optical centers
/// coincide).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualPinhole {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub mount: Pose,
}

/// Mount rotation in the camera frame (z forward, x right, y down):
/// pitch about the x axis first, then yaw about the y axis.
pub fn mount_rotation(yaw_deg: f64, pitch_deg: f64) -> Quaternion {
    let yaw = Quaternion::from_axis_angle(Vector3::y(), yaw_deg.to_radians());
    let pitch = Quaternion::from_axis_angle(Vector3::x(), pitch_deg.to_radians());
    yaw.multiply(pitch)
}

impl VirtualPinhole {
    fn new(focal: f64, width: u32, height: u32, yaw_deg: f64, pitch_deg: f64) -> Self {
        VirtualPinhole {
            fx: focal,
            fy: focal,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
            width,
            height,
            yaw_deg,
            pitch_deg,
            mount: Pose::new(mount_rotation(yaw_deg, pitch_deg), Vector3::zeros()),
        }
    }

    /// Express the virtual view in the unified model (`xi = 0`, no
    /// distortion) so it can share projection code with real cameras.
    pub fn as_mei(&self) -> MeiCamera {
        MeiCamera::pinhole(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }

    /// Ego pose of this view given the ego pose of its parent fisheye.
    pub fn ego_pose(&self, fisheye_pose: &Pose) -> Pose {
        Pose::compose(fisheye_pose, &self.mount)
    }
}

/// Build the forward and backward virtual views for one fisheye camera,
/// using the focal length of the rig's front pinholes.
pub fn make_virtual_cameras(front_focal: f64, width: u32, height: u32) -> [VirtualPinhole; 2] {
    [
        VirtualPinhole::new(
            front_focal,
            width,
            height,
            FORWARD_YAW_DEG,
            VIRTUAL_PITCH_DEG,
        ),
        VirtualPinhole::new(
            front_focal,
            width,
            height,
            BACKWARD_YAW_DEG,
            VIRTUAL_PITCH_DEG,
        ),
    ]
}

/// Per-target-pixel source coordinates into the fisheye image.
///
/// Entries are `None` where the virtual ray leaves the fisheye's
/// projectable hemisphere or lands outside its image. Stored row-major
/// (v-major) at full f64 precision.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapTable {
    pub width: u32,
    pub height: u32,
    pub entries: Vec<Option<(f64, f64)>>,
}

impl RemapTable {
    pub fn entry(&self, u: u32, v: u32) -> Option<(f64, f64)> {
        self.entries[v as usize * self.width as usize + u as usize]
    }

    pub fn valid_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    /// Flat binary layout: magic `BEVRMAP1`, dtype tag (f32), width,
    /// height, then row-major `(u_src, v_src)` f32 pairs with NaN pairs
    /// marking invalid entries. See `docs/FORMATS.md`.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        wire::write_magic(w, REMAP_MAGIC)?;
        wire::write_u8(w, wire::DTYPE_F32)?;
        wire::write_u32(w, self.width)?;
        wire::write_u32(w, self.height)?;
        for e in &self.entries {
            let (u, v) = e
                .map(|(a, b)| (a as f32, b as f32))
                .unwrap_or((f32::NAN, f32::NAN));
            wire::write_f32(w, u)?;
            wire::write_f32(w, v)?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<RemapTable> {
        wire::expect_magic(r, REMAP_MAGIC)?;
        let dtype = wire::read_u8(r)?;
        if dtype != wire::DTYPE_F32 {
            return Err(Error::Format(format!("unsupported remap dtype {dtype}")));
        }
        let width = wire::read_u32(r)?;
        let height = wire::read_u32(r)?;
        let n = width as usize * height as usize;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let u = wire::read_f32(r)?;
            let v = wire::read_f32(r)?;
            entries.push(if u.is_nan() || v.is_nan() {
                None
            } else {
                Some((f64::from(u), f64::from(v)))
            });
        }
        Ok(RemapTable {
            width,
            height,
            entries,
        })
    }

    /// Lossless text alternative: a header line, then one line per pixel
    /// in the same row-major order, either `u_src v_src` (shortest
    /// round-trip decimal) or `invalid`.
    pub fn write_text(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "BEVRMAP-TEXT 1 {} {}", self.width, self.height)?;
        for e in &self.entries {
            match e {
                Some((u, v)) => writeln!(w, "{u} {v}")?,
                None => writeln!(w, "invalid")?,
            }
        }
        Ok(())
    }

    pub fn read_text(r: &mut impl Read) -> Result<RemapTable> {
        let reader = std::io::BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty remap text".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "BEVRMAP-TEXT" || parts[1] != "1" {
            return Err(Error::Format(format!("bad remap text header: {header}")));
        }
        let width: u32 = parts[2]
            .parse()
            .map_err(|_| Error::Format("bad width".into()))?;
        let height: u32 = parts[3]
            .parse()
            .map_err(|_| Error::Format("bad height".into()))?;
        let n = width as usize * height as usize;
        let mut entries = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            if line == "invalid" {
                entries.push(None);
            } else {
                let mut it = line.split_whitespace();
                let u: f64 = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Format(format!("bad remap line: {line}")))?;
                let v: f64 = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Format(format!("bad remap line: {line}")))?;
                entries.push(Some((u, v)));
            }
        }
        if entries.len() != n {
            return Err(Error::Format(format!(
                "remap text has {} entries, expected {n}",
                entries.len()
            )));
        }
        Ok(RemapTable {
            width,
            height,
            entries,
        })
    }

    /// Resample a source single-channel image through the table with
    /// bilinear interpolation. Invalid entries produce 0.
    pub fn apply_f32(&self, src: &[f32], src_width: u32, src_height: u32) -> Vec<f32> {
        assert_eq!(src.len(), src_width as usize * src_height as usize);
        let sample = |x: f64, y: f64| -> f32 {
            let x0 = x.floor();
            let y0 = y.floor();
            let tx = (x - x0) as f32;
            let ty = (y - y0) as f32;
            let gx = |ix: i64, iy: i64| -> f32 {
                if ix < 0 || iy < 0 || ix >= i64::from(src_width) || iy >= i64::from(src_height) {
                    0.0
                } else {
                    src[iy as usize * src_width as usize + ix as usize]
                }
            };
            let (ix, iy) = (x0 as i64, y0 as i64);
            gx(ix, iy) * (1.0 - tx) * (1.0 - ty)
                + gx(ix + 1, iy) * tx * (1.0 - ty)
                + gx(ix, iy + 1) * (1.0 - tx) * ty
                + gx(ix + 1, iy + 1) * tx * ty
        };
        self.entries
            .iter()
            .map(|e| e.map(|(u, v)| sample(u, v)).unwrap_or(0.0))
            .collect()
    }
}

/// Build the pixel remap from a virtual view into its fisheye source.
pub fn build_remap(fisheye: &MeiCamera, virt: &VirtualPinhole) -> RemapTable {
    let vmei = virt.as_mei();
    let rows: Vec<Vec<Option<(f64, f64)>>> = (0..virt.height)
        .into_par_iter()
        .map(|v| {
            let mut row = Vec::with_capacity(virt.width as usize);
            for u in 0..virt.width {
                let entry = vmei
                    .unproject(f64::from(u), f64::from(v))
                    .ok()
                    .and_then(|ray| {
                        let fish_ray = virt.mount.rotation.rotate(ray);
                        fisheye.project(fish_ray).ok()
                    })
                    .and_then(|p| if p.valid { Some(p.pixel) } else { None });
                row.push(entry);
            }
            row
        })
        .collect();
    RemapTable {
        width: virt.width,
        height: virt.height,
        entries: rows.into_iter().flatten().collect(),
    }
}

/// Which cameras see each ego-frame azimuth.
///
/// A bin is probed with the horizontal direction at its center azimuth
/// (a point at infinity, so camera offsets from the ego origin do not
/// introduce parallax).
#[derive(Debug, Clone)]
pub struct CoverageReport {
    /// Bin-center azimuths in radians, `[0, 2π)`.
    pub azimuth_centers: Vec<f64>,
    /// `seen[bin][camera]`.
    pub seen: Vec<Vec<bool>>,
}

impl CoverageReport {
    pub fn covered(&self, bin: usize) -> bool {
        self.seen[bin].iter().any(|&s| s)
    }

    pub fn fully_covered(&self) -> bool {
        (0..self.azimuth_centers.len()).all(|b| self.covered(b))
    }
}

/// Report which cameras see a ground-plane ray at each azimuth bin.
pub fn fov_coverage(cameras: &[(MeiCamera, Pose)], azimuth_bins: usize) -> Result<CoverageReport> {
    if azimuth_bins < 4 {
        return Err(Error::Config(format!(
            "azimuth_bins must be >= 4 (got {azimuth_bins})"
        )));
    }
    let mut azimuth_centers = Vec::with_capacity(azimuth_bins);
    let mut seen = Vec::with_capacity(azimuth_bins);
    for b in 0..azimuth_bins {
        let theta = (b as f64 + 0.5) * std::f64::consts::TAU / azimuth_bins as f64;
        let dir_ego = Vector3::new(theta.cos(), theta.sin(), 0.0);
        let row: Vec<bool> = cameras
            .iter()
            .map(|(cam, pose)| {
                let dir_cam = pose.rotation.inverse().rotate(dir_ego);
                cam.project(dir_cam).map(|p| p.valid).unwrap_or(false)
            })
            .collect();
        azimuth_centers.push(theta);
        seen.push(row);
    }
    Ok(CoverageReport {
        azimuth_centers,
        seen,
    })
}
