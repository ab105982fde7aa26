//! Unified (MEI) central camera model.
//!
//! One parameter set covers pinhole, fisheye and catadioptric lenses: a 3D
//! point is projected onto the unit sphere, perspectively divided with the
//! mirror offset `xi`, radially distorted with `k1, k2`, and mapped to
//! pixels by the intrinsic matrix. With `xi = 0` and `k1 = k2 = 0` the
//! model reduces exactly to a plain pinhole camera.
//!
//! Forward chain for a camera-frame point `P`:
//!
//! ```text
//! Ps = P / |P|
//! Pc = (Xs / (Zs + xi), Ys / (Zs + xi))
//! r2 = |Pc|^2
//! Pd = (1 + k1 r2 + k2 r2^2) Pc
//! pixel = (fx Pd.x + cx - crop_u0, fy Pd.y + cy - crop_v0)
//! ```
//!
//! Unprojection inverts the chain: the radial polynomial is inverted with
//! a damped Newton iteration, the sphere division in closed form.

use crate::error::{Error, Result};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Guard for the `Zs + xi` denominator at the hemisphere boundary.
pub const EPS_DENOM: f64 = 1e-8;

/// Rays more than this many degrees past the optical hemisphere are
/// rejected even when `xi > 1` would admit them.
pub const HEMISPHERE_MARGIN_DEG: f64 = 5.0;

/// Damped-Newton settings for inverting the radial distortion polynomial.
const NEWTON_MAX_ITER: u32 = 20;
const NEWTON_TOL: f64 = 1e-10;

fn cos_hemisphere_limit() -> f64 {
    (90.0 + HEMISPHERE_MARGIN_DEG).to_radians().cos()
}

/// Unified camera parameters. Intrinsics describe the full sensor; a crop
/// window is modeled as a pixel offset applied after the intrinsic matrix,
/// so calibration values stay untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeiCamera {
    /// Mirror parameter; 0 for a pinhole lens.
    pub xi: f64,
    pub k1: f64,
    pub k2: f64,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Output (post-crop) image size in pixels.
    pub width: u32,
    pub height: u32,
    /// Crop window origin on the full sensor, in pixels.
    #[serde(default)]
    pub crop_u0: f64,
    #[serde(default)]
    pub crop_v0: f64,
}

/// Outcome of projecting one 3D point.
///
/// `behind` marks points outside the projectable hemisphere (denominator
/// guard or beyond the margin); their pixel is NaN. In-hemisphere points
/// that land outside the image keep their real pixel with `valid = false`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionResult {
    pub pixel: (f64, f64),
    pub valid: bool,
    pub behind: bool,
}

impl MeiCamera {
    /// Plain pinhole camera expressed in the unified model.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        MeiCamera {
            xi: 0.0,
            k1: 0.0,
            k2: 0.0,
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            crop_u0: 0.0,
            crop_v0: 0.0,
        }
    }

    pub fn is_fisheye(&self) -> bool {
        self.xi != 0.0 || self.k1 != 0.0 || self.k2 != 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.xi < 0.0 {
            return Err(Error::Config(format!("xi must be >= 0 (got {})", self.xi)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image size must be nonzero".into()));
        }
        Ok(())
    }

    /// Project a camera-frame point through the full unified chain.
    ///
    /// Errors only for a zero-length input; geometric failures are
    /// reported through the `behind`/`valid` flags.
    pub fn project(&self, p: Vector3<f64>) -> Result<ProjectionResult> {
        let norm = p.norm();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let s = p / norm;
        let denom = s.z + self.xi;
        if s.z < cos_hemisphere_limit() || denom <= EPS_DENOM {
            return Ok(ProjectionResult {
                pixel: (f64::NAN, f64::NAN),
                valid: false,
                behind: true,
            });
        }
        let xc = s.x / denom;
        let yc = s.y / denom;
        let r2 = xc * xc + yc * yc;
        let scale = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        let u = self.fx * (scale * xc) + self.cx - self.crop_u0;
        let v = self.fy * (scale * yc) + self.cy - self.crop_v0;
        let valid = u >= 0.0 && u < f64::from(self.width) && v >= 0.0 && v < f64::from(self.height);
        Ok(ProjectionResult {
            pixel: (u, v),
            valid,
            behind: false,
        })
    }

    /// Unproject a pixel to the unit ray it images, inverting distortion
    /// iteratively and the sphere division in closed form.
    pub fn unproject(&self, u: f64, v: f64) -> Result<Vector3<f64>> {
        let xd = (u + self.crop_u0 - self.cx) / self.fx;
        let yd = (v + self.crop_v0 - self.cy) / self.fy;
        let rd = xd.hypot(yd);
        let (xc, yc) = if rd == 0.0 {
            (0.0, 0.0)
        } else {
            let ru = self.undistort_radius(rd)?;
            (xd * ru / rd, yd * ru / rd)
        };
        let r2 = xc * xc + yc * yc;
        let disc = 1.0 + (1.0 - self.xi * self.xi) * r2;
        if disc < 0.0 {
            return Err(Error::OutsideProjectable);
        }
        let eta = (self.xi + disc.sqrt()) / (r2 + 1.0);
        let ray = Vector3::new(eta * xc, eta * yc, eta - self.xi);
        if ray.z < cos_hemisphere_limit() {
            return Err(Error::OutsideProjectable);
        }
        // eta places the point on the unit sphere; normalize to absorb rounding.
        Ok(ray.normalize())
    }

    /// Solve `ru (1 + k1 ru^2 + k2 ru^4) = rd` for the undistorted radius.
    ///
    /// Damped Newton starting at `rd`; converges quadratically on the
    /// monotone regime and reports the last residual when it does not.
    fn undistort_radius(&self, rd: f64) -> Result<f64> {
        if self.k1 == 0.0 && self.k2 == 0.0 {
            return Ok(rd);
        }
        let f = |r: f64| r * (1.0 + self.k1 * r * r + self.k2 * r * r * r * r) - rd;
        let mut ru = rd;
        let mut residual = f(ru);
        for _ in 0..NEWTON_MAX_ITER {
            if residual.abs() < NEWTON_TOL {
                return Ok(ru);
            }
            let r2 = ru * ru;
            let deriv = 1.0 + 3.0 * self.k1 * r2 + 5.0 * self.k2 * r2 * r2;
            if deriv.abs() < 1e-14 {
                break;
            }
            let mut step = residual / deriv;
            // Halve the step until the residual shrinks.
            let mut next = ru - step;
            let mut next_res = f(next);
            let mut halvings = 0;
            while (next_res.abs() >= residual.abs() || next < 0.0) && halvings < 8 {
                step *= 0.5;
                next = ru - step;
                next_res = f(next);
                halvings += 1;
            }
            ru = next;
            residual = next_res;
        }
        if residual.abs() < NEWTON_TOL {
            Ok(ru)
        } else {
            Err(Error::NoConvergence {
                iterations: NEWTON_MAX_ITER,
                residual: residual.abs(),
            })
        }
    }
}

/// One sampled frustum entry: the camera-frame point at `depth` meters
/// along the ray of pixel `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrustumPoint {
    pub u: u32,
    pub v: u32,
    pub depth: f64,
    pub point: Vector3<f64>,
    pub valid: bool,
}

/// Frustum point set over a strided pixel grid and a depth ladder.
///
/// Ordering is row-major over `(v, u)` with depth innermost, regardless of
/// internal parallelism. Invalid rays keep their slot (zero placeholder
/// point, `valid = false`) so tensor shapes stay rectangular.
#[derive(Debug, Clone)]
pub struct RayGrid {
    pub n_u: usize,
    pub n_v: usize,
    pub n_d: usize,
    pub stride: u32,
    pub points: Vec<FrustumPoint>,
}

/// Cast rays for every `stride`-th pixel at every depth.
///
/// Depths are ranges along the ray in meters, strictly increasing. A ray
/// is valid when unprojection succeeds and the ray re-projects into the
/// image.
pub fn generate_ray_grid(cam: &MeiCamera, stride: u32, depths: &[f64]) -> Result<RayGrid> {
    if stride < 1 {
        return Err(Error::BadStride);
    }
    if depths.is_empty() || depths[0] <= 0.0 || depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadDepths);
    }
    let us: Vec<u32> = (0..cam.width).step_by(stride as usize).collect();
    let vs: Vec<u32> = (0..cam.height).step_by(stride as usize).collect();

    let rows: Vec<Vec<FrustumPoint>> = vs
        .par_iter()
        .map(|&v| {
            let mut row = Vec::with_capacity(us.len() * depths.len());
            for &u in &us {
                let ray = cam.unproject(f64::from(u), f64::from(v)).ok();
                let valid = ray
                    .as_ref()
                    .map(|r| cam.project(*r).map(|p| p.valid).unwrap_or(false))
                    .unwrap_or(false);
                let dir = ray.unwrap_or_else(Vector3::zeros);
                for &d in depths {
                    row.push(FrustumPoint {
                        u,
                        v,
                        depth: d,
                        point: dir * d,
                        valid,
                    });
                }
            }
            row
        })
        .collect();

    Ok(RayGrid {
        n_u: us.len(),
        n_v: vs.len(),
        n_d: depths.len(),
        stride,
        points: rows.into_iter().flatten().collect(),
    })
}
