//! Geometric toolkit for bird's-eye-view 3D object detection with mixed
//! pinhole and fisheye camera rigs.
//!
//! The crate covers the deterministic, non-learned half of a BEV detection
//! stack:
//!
//! - [`geometry`]: quaternions, rigid transforms, cylindrical coordinates.
//! - [`camera`]: the unified (MEI) camera model with forward projection,
//!   iterative unprojection and frustum ray grids.
//! - [`rectify`]: virtual pinhole views synthesized from fisheye cameras,
//!   pixel remap tables and field-of-view coverage reports.
//! - [`polar`]: polar/cylindrical BEV grids, wrap-safe encodings and
//!   uniform polar anchor generation.
//! - [`view`]: frustum lifting, BEV splatting, reference-point projection
//!   and position-encoding inputs.
//! - [`convert`]: a KITTI-360-style to nuScenes-style annotation converter
//!   emitting tokenized record sets.
//! - [`eval`]: detection metrics (AP, TP errors, NDS without attribute
//!   error) with distance and angular stratification.
//!
//! Every operation is pure and deterministic: identical inputs produce
//! bit-identical outputs regardless of thread count. See `docs/FORMATS.md`
//! for the on-disk formats and `examples/` for one runnable program per
//! capability.
//!
//! # Frame conventions
//!
//! Right-handed throughout. Ego frame: x forward, y left, z up. Camera
//! frame: z forward (optical axis), x right, y down. A sensor `Pose` maps
//! sensor-frame coordinates into the ego frame. Azimuth is measured in the
//! ego xy-plane from +x toward +y, wrapped to `[0, 2π)`.

pub mod boxes;
pub mod camera;
pub mod config;
pub mod convert;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod polar;
pub mod rectify;
pub mod view;
pub(crate) mod wire;

pub use boxes::{Box3D, BoxFrame};
pub use camera::{FrustumPoint, MeiCamera, ProjectionResult, RayGrid};
pub use config::ToolkitConfig;

pub use error::{Error, Result};
pub use geometry::{CylindricalPoint, Pose, Quaternion};
pub use polar::{BevGrid, CartesianGrid, PolarEncoding, PolarGrid};
pub use rectify::{CoverageReport, RemapTable, VirtualPinhole};
pub use view::{BevFeatureMap, FeatureCloud, FeatureGrid};
