//! Toolkit configuration: one human-editable TOML file holding the
//! camera calibration set, BEV grid, depth ladder, converter thresholds
//! and evaluation settings. All units are SI (meters, seconds, radians
//! unless a key says degrees). Unknown keys are hard errors.

use crate::camera::MeiCamera;
use crate::convert::{ConvertOptions, RigCamera, RigLidar, SensorRig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::geometry::{Pose, Quaternion};
use crate::polar::{BevGrid, CartesianGrid, PolarGrid};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolkitConfig {
    pub grid: GridSection,
    #[serde(default)]
    pub depths: DepthSection,
    #[serde(default)]
    pub converter: ConverterSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rectification: Option<RectificationSection>,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub cameras: Vec<CameraEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar: Option<LidarEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// `polar` or `cartesian`.
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_theta: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_rho: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_y: Option<usize>,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSection {
    /// Meters along the ray.
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for DepthSection {
    fn default() -> Self {
        // Uniform ladder over the evaluation horizon plus margin.
        DepthSection {
            min: 1.0,
            max: 61.0,
            count: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterSection {
    pub window_m: f64,
    pub d_max: f64,
    pub min_pts: usize,
    /// Seconds.
    pub sync_tol: f64,
}

impl Default for ConverterSection {
    fn default() -> Self {
        let d = ConvertOptions::default();
        ConverterSection {
            window_m: d.window_m,
            d_max: d.d_max,
            min_pts: d.min_pts,
            sync_tol: d.sync_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectificationSection {
    /// Focal length of the rig's front pinholes, pixels.
    pub front_focal: f64,
    #[serde(default = "default_virtual_width")]
    pub virtual_width: u32,
    #[serde(default = "default_virtual_height")]
    pub virtual_height: u32,
}

fn default_virtual_width() -> u32 {
    704
}

fn default_virtual_height() -> u32 {
    376
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    #[serde(default = "default_classes")]
    pub classes: Vec<String>,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    /// `[lo, hi)` meter bins for distance stratification.
    #[serde(default = "default_distance_bins")]
    pub distance_bins: Vec<[f64; 2]>,
}

fn default_classes() -> Vec<String> {
    crate::convert::EVAL_CLASSES
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_thresholds() -> Vec<f64> {
    crate::eval::CENTER_DIST_THRESHOLDS.to_vec()
}

fn default_distance_bins() -> Vec<[f64; 2]> {
    crate::eval::distance_bins_10m()
        .into_iter()
        .map(|(lo, hi)| [lo, hi])
        .collect()
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            classes: default_classes(),
            thresholds: default_thresholds(),
            distance_bins: default_distance_bins(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub name: String,
    #[serde(default)]
    pub xi: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub crop_u0: f64,
    #[serde(default)]
    pub crop_v0: f64,
    /// Camera-to-ego translation, meters.
    pub translation: [f64; 3],
    /// Camera-to-ego rotation, unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
}

impl CameraEntry {
    pub fn camera(&self) -> MeiCamera {
        MeiCamera {
            xi: self.xi,
            k1: self.k1,
            k2: self.k2,
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            crop_u0: self.crop_u0,
            crop_v0: self.crop_v0,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(
            Quaternion::new(
                self.rotation[0],
                self.rotation[1],
                self.rotation[2],
                self.rotation[3],
            ),
            Vector3::new(
                self.translation[0],
                self.translation[1],
                self.translation[2],
            ),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarEntry {
    pub name: String,
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
}

impl ToolkitConfig {
    /// Parse and validate a config file. Unknown keys fail the parse.
    pub fn load(path: &Path) -> Result<ToolkitConfig> {
        let body = std::fs::read_to_string(path).map_err(Error::io_at(path))?;
        let cfg: ToolkitConfig =
            toml::from_str(&body).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.bev_grid()?.validate()?;
        let d = &self.depths;
        if !(d.min > 0.0 && d.max > d.min && d.count >= 1) {
            return Err(Error::Config(format!(
                "depths must satisfy 0 < min < max, count >= 1 (got {} .. {} x {})",
                d.min, d.max, d.count
            )));
        }
        if self.converter.sync_tol < 0.0 || self.converter.window_m <= 0.0 {
            return Err(Error::Config(
                "converter thresholds must be positive".into(),
            ));
        }
        let mut names = std::collections::BTreeSet::new();
        for cam in &self.cameras {
            cam.camera().validate()?;
            if !names.insert(cam.name.clone()) {
                return Err(Error::Config(format!(
                    "duplicate camera name `{}`",
                    cam.name
                )));
            }
        }
        if let Some(l) = &self.lidar {
            if !names.insert(l.name.clone()) {
                return Err(Error::Config(format!(
                    "lidar name `{}` collides with a camera",
                    l.name
                )));
            }
        }
        for t in &self.evaluation.thresholds {
            if *t <= 0.0 {
                return Err(Error::Config("match thresholds must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn bev_grid(&self) -> Result<BevGrid> {
        let g = &self.grid;
        let need = |opt: Option<f64>, key: &str| {
            opt.ok_or_else(|| Error::Config(format!("grid.{key} required for mode `{}`", g.mode)))
        };
        let need_n = |opt: Option<usize>, key: &str| {
            opt.ok_or_else(|| Error::Config(format!("grid.{key} required for mode `{}`", g.mode)))
        };
        match g.mode.as_str() {
            "polar" => Ok(BevGrid::Polar(PolarGrid {
                rho_max: need(g.rho_max, "rho_max")?,
                n_theta: need_n(g.n_theta, "n_theta")?,
                n_rho: need_n(g.n_rho, "n_rho")?,
                z_min: g.z_min,
                z_max: g.z_max,
            })),
            "cartesian" => Ok(BevGrid::Cartesian(CartesianGrid {
                x_min: need(g.x_min, "x_min")?,
                x_max: need(g.x_max, "x_max")?,
                y_min: need(g.y_min, "y_min")?,
                y_max: need(g.y_max, "y_max")?,
                n_x: need_n(g.n_x, "n_x")?,
                n_y: need_n(g.n_y, "n_y")?,
                z_min: g.z_min,
                z_max: g.z_max,
            })),
            other => Err(Error::Config(format!("unknown grid mode `{other}`"))),
        }
    }

    /// The uniform depth ladder, endpoints inclusive.
    pub fn depth_ladder(&self) -> Vec<f64> {
        let d = &self.depths;
        if d.count == 1 {
            return vec![d.min];
        }
        (0..d.count)
            .map(|i| d.min + (d.max - d.min) * i as f64 / (d.count - 1) as f64)
            .collect()
    }

    pub fn convert_options(&self) -> ConvertOptions {
        ConvertOptions {
            window_m: self.converter.window_m,
            d_max: self.converter.d_max,
            min_pts: self.converter.min_pts,
            sync_tol: self.converter.sync_tol,
        }
    }

    pub fn rig(&self) -> SensorRig {
        SensorRig {
            cameras: self
                .cameras
                .iter()
                .map(|c| RigCamera {
                    name: c.name.clone(),
                    camera: c.camera(),
                    pose: c.pose(),
                })
                .collect(),
            lidar: self.lidar.as_ref().map(|l| RigLidar {
                name: l.name.clone(),
                pose: Pose::new(
                    Quaternion::new(l.rotation[0], l.rotation[1], l.rotation[2], l.rotation[3]),
                    Vector3::new(l.translation[0], l.translation[1], l.translation[2]),
                ),
            }),
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            classes: self.evaluation.classes.clone(),
            thresholds: self.evaluation.thresholds.clone(),
        }
    }

    pub fn distance_strata(&self) -> crate::eval::Strata {
        crate::eval::Strata::Distance(
            self.evaluation
                .distance_bins
                .iter()
                .map(|b| (b[0], b[1]))
                .collect(),
        )
    }

    pub fn find_camera(&self, name: &str) -> Result<&CameraEntry> {
        self.cameras
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Config(format!("camera `{name}` not in calibration set")))
    }

    /// Fisheye cameras (nonzero mirror or distortion parameters).
    pub fn fisheye_cameras(&self) -> Vec<&CameraEntry> {
        self.cameras
            .iter()
            .filter(|c| c.camera().is_fisheye())
            .collect()
    }
}
