//! Deterministic geometric cores of the view-transformation paths:
//! frustum lifting and BEV splatting (forward projection), reference-point
//! projection (backward projection), and position-encoding inputs
//! (projection-free).
//!
//! Splatting uses a fixed reduction order — contributions to a bin are
//! sorted by a canonical byte-level key before summation — so results are
//! bit-identical for any input permutation and any thread count.

use crate::camera::{generate_ray_grid, MeiCamera};
use crate::error::{Error, Result};
use crate::geometry::{cart_to_cyl, Pose};
use crate::polar::{bin_index, encode_polar, BevGrid};
use crate::wire;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const CLOUD_MAGIC: &[u8; 8] = b"BEVFCLD1";
const MAP_MAGIC: &[u8; 8] = b"BEVFMAP1";
const PE_MAGIC: &[u8; 8] = b"BEVPEIN1";

/// Per-pixel feature vectors over a strided pixel grid, row-major
/// (v-major) with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub n_u: usize,
    pub n_v: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(n_u: usize, n_v: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_u * n_v * channels {
            return Err(Error::RaggedFeatures);
        }
        Ok(FeatureGrid {
            n_u,
            n_v,
            channels,
            data,
        })
    }

    /// All-ones features; handy as an occupancy signal.
    pub fn ones(n_u: usize, n_v: usize, channels: usize) -> Self {
        FeatureGrid {
            n_u,
            n_v,
            channels,
            data: vec![1.0; n_u * n_v * channels],
        }
    }

    pub fn at(&self, u_idx: usize, v_idx: usize) -> &[f64] {
        let start = (v_idx * self.n_u + u_idx) * self.channels;
        &self.data[start..start + self.channels]
    }
}

/// Ego-frame point cloud where every point carries a fixed-length feature
/// vector and the id of the camera it was lifted from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureCloud {
    pub channels: usize,
    pub positions: Vec<Vector3<f64>>,
    /// `positions.len() * channels` values, point-major.
    pub features: Vec<f64>,
    pub camera_ids: Vec<u32>,
}

impl FeatureCloud {
    pub fn new(channels: usize) -> Self {
        FeatureCloud {
            channels,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    pub fn push(&mut self, position: Vector3<f64>, feature: &[f64], camera_id: u32) -> Result<()> {
        if feature.len() != self.channels {
            return Err(Error::RaggedFeatures);
        }
        self.positions.push(position);
        self.features.extend_from_slice(feature);
        self.camera_ids.push(camera_id);
        Ok(())
    }

    /// Flat binary layout: magic `BEVFCLD1`, dtype tag (f64), point count,
    /// channel count, then positions, features and camera ids as
    /// contiguous blocks. See `docs/FORMATS.md`.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        wire::write_magic(w, CLOUD_MAGIC)?;
        wire::write_u8(w, wire::DTYPE_F64)?;
        wire::write_u32(w, self.len() as u32)?;
        wire::write_u32(w, self.channels as u32)?;
        for p in &self.positions {
            wire::write_f64(w, p.x)?;
            wire::write_f64(w, p.y)?;
            wire::write_f64(w, p.z)?;
        }
        wire::write_f64_slice(w, &self.features)?;
        for &id in &self.camera_ids {
            wire::write_u32(w, id)?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<FeatureCloud> {
        wire::expect_magic(r, CLOUD_MAGIC)?;
        let dtype = wire::read_u8(r)?;
        if dtype != wire::DTYPE_F64 {
            return Err(Error::Format(format!("unsupported cloud dtype {dtype}")));
        }
        let n = wire::read_u32(r)? as usize;
        let channels = wire::read_u32(r)? as usize;
        let mut positions = Vec::with_capacity(n);
        for _ in 0..n {
            let x = wire::read_f64(r)?;
            let y = wire::read_f64(r)?;
            let z = wire::read_f64(r)?;
            positions.push(Vector3::new(x, y, z));
        }
        let features = wire::read_f64_vec(r, n * channels)?;
        let mut camera_ids = Vec::with_capacity(n);
        for _ in 0..n {
            camera_ids.push(wire::read_u32(r)?);
        }
        Ok(FeatureCloud {
            channels,
            positions,
            features,
            camera_ids,
        })
    }
}

/// Lift per-pixel features along distortion-aware rays into the ego frame.
///
/// Every valid `(pixel, depth)` pair contributes one point carrying its
/// pixel's feature vector; invalid rays are omitted. The feature grid must
/// match the strided pixel grid of the camera.
pub fn lift_frustum(
    cam: &MeiCamera,
    cam_pose: &Pose,
    stride: u32,
    depths: &[f64],
    features: &FeatureGrid,
    camera_id: u32,
) -> Result<FeatureCloud> {
    let grid = generate_ray_grid(cam, stride, depths)?;
    if features.n_u != grid.n_u || features.n_v != grid.n_v {
        return Err(Error::FeatureShapeMismatch {
            got_u: features.n_u,
            got_v: features.n_v,
            got_c: features.channels,
            want_u: grid.n_u,
            want_v: grid.n_v,
        });
    }
    let mut cloud = FeatureCloud::new(features.channels);
    for (i, fp) in grid.points.iter().enumerate() {
        if !fp.valid {
            continue;
        }
        let pixel_idx = i / grid.n_d;
        let u_idx = pixel_idx % grid.n_u;
        let v_idx = pixel_idx / grid.n_u;
        cloud.push(
            cam_pose.transform_point(fp.point),
            features.at(u_idx, v_idx),
            camera_id,
        )?;
    }
    Ok(cloud)
}

/// BEV feature map over a polar or Cartesian grid, channel-major:
/// `data[c * n_bins + bin]` with `bin = theta_idx * n_rho + rho_idx`
/// (polar) or `bin = x_idx * n_y + y_idx` (Cartesian).
#[derive(Debug, Clone, PartialEq)]
pub struct BevFeatureMap {
    pub grid: BevGrid,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl BevFeatureMap {
    pub fn n_bins(&self) -> usize {
        self.grid.n_bins()
    }

    pub fn at(&self, channel: usize, bin: usize) -> f64 {
        self.data[channel * self.n_bins() + bin]
    }

    /// Total splatted mass of one channel.
    pub fn channel_sum(&self, channel: usize) -> f64 {
        let n = self.n_bins();
        self.data[channel * n..(channel + 1) * n].iter().sum()
    }

    /// Flat binary layout: magic `BEVFMAP1`, dtype tag (f64), mode byte
    /// (0 = cartesian, 1 = polar), dims, channels, then channel-major
    /// data. See `docs/FORMATS.md`.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        wire::write_magic(w, MAP_MAGIC)?;
        wire::write_u8(w, wire::DTYPE_F64)?;
        let (mode, d0, d1) = match &self.grid {
            BevGrid::Cartesian(g) => (0u8, g.n_x as u32, g.n_y as u32),
            BevGrid::Polar(g) => (1u8, g.n_theta as u32, g.n_rho as u32),
        };
        wire::write_u8(w, mode)?;
        wire::write_u32(w, d0)?;
        wire::write_u32(w, d1)?;
        wire::write_u32(w, self.channels as u32)?;
        match &self.grid {
            BevGrid::Cartesian(g) => {
                wire::write_f64_slice(w, &[g.x_min, g.x_max, g.y_min, g.y_max, g.z_min, g.z_max])?
            }
            BevGrid::Polar(g) => wire::write_f64_slice(w, &[g.rho_max, g.z_min, g.z_max])?,
        }
        wire::write_f64_slice(w, &self.data)?;
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<BevFeatureMap> {
        wire::expect_magic(r, MAP_MAGIC)?;
        let dtype = wire::read_u8(r)?;
        if dtype != wire::DTYPE_F64 {
            return Err(Error::Format(format!("unsupported map dtype {dtype}")));
        }
        let mode = wire::read_u8(r)?;
        let d0 = wire::read_u32(r)? as usize;
        let d1 = wire::read_u32(r)? as usize;
        let channels = wire::read_u32(r)? as usize;
        let grid = match mode {
            0 => {
                let p = wire::read_f64_vec(r, 6)?;
                BevGrid::Cartesian(crate::polar::CartesianGrid {
                    x_min: p[0],
                    x_max: p[1],
                    y_min: p[2],
                    y_max: p[3],
                    n_x: d0,
                    n_y: d1,
                    z_min: p[4],
                    z_max: p[5],
                })
            }
            1 => {
                let p = wire::read_f64_vec(r, 3)?;
                BevGrid::Polar(crate::polar::PolarGrid {
                    rho_max: p[0],
                    n_theta: d0,
                    n_rho: d1,
                    z_min: p[1],
                    z_max: p[2],
                })
            }
            m => return Err(Error::Format(format!("unknown grid mode {m}"))),
        };
        let data = wire::read_f64_vec(r, d0 * d1 * channels)?;
        Ok(BevFeatureMap {
            grid,
            channels,
            data,
        })
    }
}

/// Bin of a point under a grid, or `None` when it falls outside the grid
/// footprint or the z slab (`[z_min, z_max)`).
fn splat_bin(grid: &BevGrid, p: &Vector3<f64>) -> Option<usize> {
    let (z_min, z_max) = grid.z_slab();
    if p.z < z_min || p.z >= z_max {
        return None;
    }
    match grid {
        BevGrid::Polar(g) => {
            let (ti, ri) = bin_index(&cart_to_cyl(*p), g)?;
            Some(ti * g.n_rho + ri)
        }
        BevGrid::Cartesian(g) => {
            if p.x < g.x_min || p.x >= g.x_max || p.y < g.y_min || p.y >= g.y_max {
                return None;
            }
            let dx = (g.x_max - g.x_min) / g.n_x as f64;
            let dy = (g.y_max - g.y_min) / g.n_y as f64;
            let ix = (((p.x - g.x_min) / dx) as usize).min(g.n_x - 1);
            let iy = (((p.y - g.y_min) / dy) as usize).min(g.n_y - 1);
            Some(ix * g.n_y + iy)
        }
    }
}

/// Canonical byte-level sort key for a cloud point; any fixed total order
/// works, this one compares position bits, camera id, then feature bits.
fn canonical_key(cloud: &FeatureCloud, i: usize) -> (u64, u64, u64, u32, Vec<u64>) {
    let p = cloud.positions[i];
    (
        p.x.to_bits(),
        p.y.to_bits(),
        p.z.to_bits(),
        cloud.camera_ids[i],
        cloud.feature(i).iter().map(|f| f.to_bits()).collect(),
    )
}

/// Sum-pool point features into grid bins.
///
/// Points outside the grid footprint or z slab are dropped, so the map
/// conserves exactly the mass of the in-range points. The result is
/// independent of point order and parallel schedule, bit for bit.
pub fn splat(cloud: &FeatureCloud, grid: &BevGrid) -> Result<BevFeatureMap> {
    grid.validate()?;
    if cloud.features.len() != cloud.len() * cloud.channels || cloud.camera_ids.len() != cloud.len()
    {
        return Err(Error::RaggedFeatures);
    }
    let n_bins = grid.n_bins();
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n_bins];
    for (i, p) in cloud.positions.iter().enumerate() {
        if let Some(bin) = splat_bin(grid, p) {
            buckets[bin].push(i as u32);
        }
    }

    let channels = cloud.channels;
    let per_bin: Vec<Vec<f64>> = buckets
        .into_par_iter()
        .map(|mut members| {
            members.sort_by_cached_key(|&i| canonical_key(cloud, i as usize));
            let mut acc = vec![0.0f64; channels];
            for &i in &members {
                for (a, f) in acc.iter_mut().zip(cloud.feature(i as usize)) {
                    *a += f;
                }
            }
            acc
        })
        .collect();

    let mut data = vec![0.0f64; channels * n_bins];
    for (bin, acc) in per_bin.iter().enumerate() {
        for (c, &v) in acc.iter().enumerate() {
            data[c * n_bins + bin] = v;
        }
    }
    Ok(BevFeatureMap {
        grid: *grid,
        channels,
        data,
    })
}

/// Projection of one ego-frame reference point into a camera.
///
/// Invalid points are flagged, never dropped, so downstream attention can
/// mask on validity. Behind-camera points carry NaN pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePixel {
    pub u: f64,
    pub v: f64,
    pub valid: bool,
}

/// Lift BEV grid bin centers to 3D query points at `n_z` uniform pillar
/// heights over the z slab, bin-major then height order. These are the
/// default query positions for reference-point projection; callers add
/// their own offsets.
pub fn bev_query_points(grid: &BevGrid, n_z: usize) -> Vec<Vector3<f64>> {
    let (z_min, z_max) = grid.z_slab();
    let zs: Vec<f64> = (0..n_z)
        .map(|k| z_min + (k as f64 + 0.5) * (z_max - z_min) / n_z as f64)
        .collect();
    let mut out = Vec::new();
    match grid {
        BevGrid::Polar(g) => {
            for ti in 0..g.n_theta {
                let theta = (ti as f64 + 0.5) * g.theta_bin_width();
                for ri in 0..g.n_rho {
                    let rho = (ri as f64 + 0.5) * g.rho_bin_width();
                    for &z in &zs {
                        out.push(Vector3::new(rho * theta.cos(), rho * theta.sin(), z));
                    }
                }
            }
        }
        BevGrid::Cartesian(g) => {
            let dx = (g.x_max - g.x_min) / g.n_x as f64;
            let dy = (g.y_max - g.y_min) / g.n_y as f64;
            for ix in 0..g.n_x {
                let x = g.x_min + (ix as f64 + 0.5) * dx;
                for iy in 0..g.n_y {
                    let y = g.y_min + (iy as f64 + 0.5) * dy;
                    for &z in &zs {
                        out.push(Vector3::new(x, y, z));
                    }
                }
            }
        }
    }
    out
}

/// Project ego-frame reference points (BEV queries plus caller-supplied
/// offsets) into a camera's image plane.
pub fn project_reference_points(
    points_ego: &[Vector3<f64>],
    cam: &MeiCamera,
    cam_pose: &Pose,
) -> Vec<ReferencePixel> {
    let ego_to_cam = cam_pose.inverse();
    points_ego
        .iter()
        .map(|p| {
            let pc = ego_to_cam.transform_point(*p);
            match cam.project(pc) {
                Ok(r) => ReferencePixel {
                    u: r.pixel.0,
                    v: r.pixel.1,
                    valid: r.valid,
                },
                Err(_) => ReferencePixel {
                    u: f64::NAN,
                    v: f64::NAN,
                    valid: false,
                },
            }
        })
        .collect()
}

/// Coordinate flavor of position-encoding inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeMode {
    Cartesian,
    Polar,
}

/// Deterministic inputs for a 3D position-encoding network: one encoding
/// vector per `(pixel, depth)` sample, in ray-grid order (row-major over
/// `(v, u)`, depth innermost). Invalid rays keep their slot with a zero
/// encoding and `valid = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeInputs {
    pub mode: PeMode,
    pub n_u: usize,
    pub n_v: usize,
    pub n_d: usize,
    /// 3 for Cartesian `(x,y,z)`, 4 for polar `[sin θ, cos θ, ρ, z]`.
    pub enc_len: usize,
    pub data: Vec<f64>,
    pub valid: Vec<bool>,
}

impl PeInputs {
    pub fn encoding(&self, i: usize) -> &[f64] {
        &self.data[i * self.enc_len..(i + 1) * self.enc_len]
    }

    /// Flat binary layout: magic `BEVPEIN1`, dtype tag (f64), mode byte
    /// (0 = cartesian, 1 = polar), dims `(n_v, n_u, n_d, enc_len)`, data,
    /// then the validity mask as one byte per sample.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        wire::write_magic(w, PE_MAGIC)?;
        wire::write_u8(w, wire::DTYPE_F64)?;
        wire::write_u8(w, if self.mode == PeMode::Polar { 1 } else { 0 })?;
        wire::write_u32(w, self.n_v as u32)?;
        wire::write_u32(w, self.n_u as u32)?;
        wire::write_u32(w, self.n_d as u32)?;
        wire::write_u32(w, self.enc_len as u32)?;
        wire::write_f64_slice(w, &self.data)?;
        for &v in &self.valid {
            wire::write_u8(w, u8::from(v))?;
        }
        Ok(())
    }
}

/// Generate position-encoding inputs for one camera.
///
/// Both modes share the same lifted frustum; the mode changes only the
/// encoding. Cartesian normalization ranges come from the BEV grid
/// (`[-rho_max, rho_max]` horizontally for polar grids) and are clamped
/// to `[0, 1]`.
pub fn petr_pe_inputs(
    cam: &MeiCamera,
    cam_pose: &Pose,
    stride: u32,
    depths: &[f64],
    grid: &BevGrid,
    mode: PeMode,
) -> Result<PeInputs> {
    if mode == PeMode::Polar {
        grid.as_polar()?;
    }
    let rays = generate_ray_grid(cam, stride, depths)?;
    let enc_len = match mode {
        PeMode::Cartesian => 3,
        PeMode::Polar => 4,
    };
    let (x_rng, y_rng, z_rng) = match grid {
        BevGrid::Cartesian(g) => ((g.x_min, g.x_max), (g.y_min, g.y_max), (g.z_min, g.z_max)),
        BevGrid::Polar(g) => (
            (-g.rho_max, g.rho_max),
            (-g.rho_max, g.rho_max),
            (g.z_min, g.z_max),
        ),
    };
    let norm = |v: f64, (lo, hi): (f64, f64)| ((v - lo) / (hi - lo)).clamp(0.0, 1.0);

    let mut data = Vec::with_capacity(rays.points.len() * enc_len);
    let mut valid = Vec::with_capacity(rays.points.len());
    for fp in &rays.points {
        valid.push(fp.valid);
        if !fp.valid {
            data.extend(std::iter::repeat_n(0.0, enc_len));
            continue;
        }
        let ego = cam_pose.transform_point(fp.point);
        match mode {
            PeMode::Cartesian => {
                data.push(norm(ego.x, x_rng));
                data.push(norm(ego.y, y_rng));
                data.push(norm(ego.z, z_rng));
            }
            PeMode::Polar => {
                let e = encode_polar(ego, grid.as_polar()?)?;
                data.extend_from_slice(&e.to_array());
            }
        }
    }
    Ok(PeInputs {
        mode,
        n_u: rays.n_u,
        n_v: rays.n_v,
        n_d: rays.n_d,
        enc_len,
        data,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quaternion;
    use crate::polar::{CartesianGrid, PolarGrid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn polar_grid() -> BevGrid {
        BevGrid::Polar(PolarGrid {
            rho_max: 40.0,
            n_theta: 8,
            n_rho: 4,
            z_min: -3.0,
            z_max: 5.0,
        })
    }

    fn test_fisheye() -> MeiCamera {
        MeiCamera {
            xi: 1.0,
            k1: 0.05,
            k2: 0.0,
            fx: 60.0,
            fy: 60.0,
            cx: 44.0,
            cy: 24.0,
            width: 88,
            height: 48,
            crop_u0: 0.0,
            crop_v0: 0.0,
        }
    }

    #[test]
    fn lift_principal_point_identity_pose() {
        let cam = MeiCamera::pinhole(10.0, 10.0, 0.0, 0.0, 1, 1);
        let features = FeatureGrid::ones(1, 1, 2);
        let cloud = lift_frustum(&cam, &Pose::identity(), 1, &[5.0], &features, 0).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_relative_eq!(
            cloud.positions[0],
            Vector3::new(0.0, 0.0, 5.0),
            epsilon = 1e-12
        );
        assert_eq!(cloud.feature(0), &[1.0, 1.0]);
    }

    #[test]
    fn lift_count_is_valid_pixels_times_depths() {
        let cam = test_fisheye();
        let depths = [1.0, 2.0, 3.0];
        let stride = 8;
        let rays = generate_ray_grid(&cam, stride, &depths).unwrap();
        let valid_pixels = rays
            .points
            .iter()
            .step_by(rays.n_d)
            .filter(|p| p.valid)
            .count();
        let features = FeatureGrid::ones(rays.n_u, rays.n_v, 1);
        let cloud = lift_frustum(&cam, &Pose::identity(), stride, &depths, &features, 3).unwrap();
        assert_eq!(cloud.len(), valid_pixels * depths.len());
        assert!(cloud.camera_ids.iter().all(|&id| id == 3));
    }

    #[test]
    fn lift_rejects_shape_mismatch() {
        let cam = test_fisheye();
        let features = FeatureGrid::ones(3, 3, 1);
        assert!(matches!(
            lift_frustum(&cam, &Pose::identity(), 8, &[1.0], &features, 0),
            Err(Error::FeatureShapeMismatch { .. })
        ));
    }

    #[test]
    fn fisheye_edge_rays_diverge_from_pinhole() {
        // With xi > 0 an edge pixel's ray must bend away from the straight
        // pinhole ray, and more so for larger xi.
        let mut last_mean = 0.0;
        for xi in [0.5, 1.0, 2.0] {
            let cam = MeiCamera {
                xi,
                ..test_fisheye()
            };
            let mut sum = 0.0;
            let mut n = 0;
            // Columns 28 px off-center stay inside the projectable domain
            // of all three mirror parameters.
            for u in [16u32, 72] {
                for v in 14..34u32 {
                    let ray = cam.unproject(f64::from(u), f64::from(v)).unwrap();
                    let straight = Vector3::new(
                        (f64::from(u) - cam.cx) / cam.fx,
                        (f64::from(v) - cam.cy) / cam.fy,
                        1.0,
                    )
                    .normalize();
                    sum += ray.dot(&straight).clamp(-1.0, 1.0).acos();
                    n += 1;
                }
            }
            let mean = sum / f64::from(n);
            assert!(
                mean > last_mean,
                "xi={xi}: divergence {mean} not increasing"
            );
            last_mean = mean;
        }
        assert!(last_mean > 0.0);
    }

    #[test]
    fn splat_sums_shared_bin() {
        let grid = polar_grid();
        let mut cloud = FeatureCloud::new(2);
        cloud
            .push(Vector3::new(5.0, 0.1, 0.0), &[1.0, 10.0], 0)
            .unwrap();
        cloud
            .push(Vector3::new(5.1, 0.1, 0.0), &[2.0, 20.0], 1)
            .unwrap();
        let map = splat(&cloud, &grid).unwrap();
        let bin = splat_bin(&grid, &Vector3::new(5.0, 0.1, 0.0)).unwrap();
        assert_relative_eq!(map.at(0, bin), 3.0);
        assert_relative_eq!(map.at(1, bin), 30.0);
    }

    #[test]
    fn splat_empty_cloud_is_zero_map() {
        let map = splat(&FeatureCloud::new(4), &polar_grid()).unwrap();
        assert!(map.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn splat_drops_out_of_slab_points() {
        let grid = polar_grid();
        let mut cloud = FeatureCloud::new(1);
        cloud
            .push(Vector3::new(5.0, 0.0, 100.0), &[1.0], 0)
            .unwrap();
        cloud
            .push(Vector3::new(500.0, 0.0, 0.0), &[1.0], 0)
            .unwrap();
        let map = splat(&cloud, &grid).unwrap();
        assert_relative_eq!(map.channel_sum(0), 0.0);
    }

    /// Brute-force oracle: test every point against every bin.
    fn splat_oracle(cloud: &FeatureCloud, grid: &BevGrid) -> Vec<f64> {
        let n_bins = grid.n_bins();
        let mut data = vec![0.0f64; cloud.channels * n_bins];
        for bin in 0..n_bins {
            let mut members: Vec<usize> = (0..cloud.len())
                .filter(|&i| splat_bin(grid, &cloud.positions[i]) == Some(bin))
                .collect();
            members.sort_by_key(|&i| canonical_key(cloud, i));
            for i in members {
                for c in 0..cloud.channels {
                    data[c * n_bins + bin] += cloud.feature(i)[c];
                }
            }
        }
        data
    }

    fn random_cloud(seed: u64, n: usize) -> FeatureCloud {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cloud = FeatureCloud::new(3);
        for _ in 0..n {
            let p = Vector3::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-5.0..7.0),
            );
            let f = [rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0), 1.0];
            cloud.push(p, &f, rng.gen_range(0..4)).unwrap();
        }
        cloud
    }

    #[test]
    fn splat_matches_bruteforce_oracle_exactly() {
        let grid = polar_grid();
        let cloud = random_cloud(7, 100);
        let map = splat(&cloud, &grid).unwrap();
        let oracle = splat_oracle(&cloud, &grid);
        assert_eq!(
            map.data, oracle,
            "splat must equal the membership-test oracle bitwise"
        );
    }

    #[test]
    fn splat_is_permutation_invariant_bitwise() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let grid = polar_grid();
        let cloud = random_cloud(11, 300);
        let base = splat(&cloud, &grid).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        order.shuffle(&mut rng);
        let mut shuffled = FeatureCloud::new(cloud.channels);
        for &i in &order {
            shuffled
                .push(cloud.positions[i], cloud.feature(i), cloud.camera_ids[i])
                .unwrap();
        }
        let permuted = splat(&shuffled, &grid).unwrap();
        assert_eq!(base.data, permuted.data);
    }

    #[test]
    fn splat_conserves_mass_on_cartesian_grid() {
        let grid = BevGrid::Cartesian(CartesianGrid {
            x_min: -50.0,
            x_max: 50.0,
            y_min: -50.0,
            y_max: 50.0,
            n_x: 10,
            n_y: 10,
            z_min: -5.0,
            z_max: 7.0,
        });
        let cloud = random_cloud(23, 500);
        let map = splat(&cloud, &grid).unwrap();
        for c in 0..cloud.channels {
            let want: f64 = (0..cloud.len())
                .filter(|&i| splat_bin(&grid, &cloud.positions[i]).is_some())
                .map(|i| cloud.feature(i)[c])
                .sum();
            let got = map.channel_sum(c);
            let denom = want.abs().max(1e-12);
            assert!(
                ((got - want) / denom).abs() < 1e-6,
                "channel {c}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn reference_points_match_direct_projection() {
        let cam = test_fisheye();
        let pose = Pose::new(
            Quaternion::from_axis_angle(Vector3::z(), 0.4),
            Vector3::new(1.0, -0.5, 1.2),
        );
        let points = [
            Vector3::new(5.0, 1.0, 1.0),
            Vector3::new(-3.0, 2.0, 0.5),
            Vector3::new(0.0, 8.0, 1.5),
            Vector3::new(2.0, -6.0, 2.0),
        ];
        let got = project_reference_points(&points, &cam, &pose);
        let inv = pose.inverse();
        for (p, r) in points.iter().zip(&got) {
            let direct = cam.project(inv.transform_point(*p)).unwrap();
            assert_eq!(r.valid, direct.valid);
            if direct.valid {
                assert_relative_eq!(r.u, direct.pixel.0, epsilon = 1e-12);
                assert_relative_eq!(r.v, direct.pixel.1, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bev_queries_cover_every_bin_at_every_height() {
        let grid = polar_grid();
        let queries = bev_query_points(&grid, 4);
        assert_eq!(queries.len(), 8 * 4 * 4);
        let (z_min, z_max) = grid.z_slab();
        for q in &queries {
            assert!(q.z > z_min && q.z < z_max);
            let cyl = cart_to_cyl(*q);
            assert!(bin_index(&cyl, grid.as_polar().unwrap()).is_some());
        }
        // Every bin receives exactly n_z queries.
        let mut counts = std::collections::HashMap::new();
        for q in &queries {
            let bin = bin_index(&cart_to_cyl(*q), grid.as_polar().unwrap()).unwrap();
            *counts.entry(bin).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 32);
        assert!(counts.values().all(|&c| c == 4));
    }

    #[test]
    fn camera_origin_point_is_invalid() {
        let cam = test_fisheye();
        let pose = Pose::new(Quaternion::identity(), Vector3::new(2.0, 0.0, 1.0));
        let got = project_reference_points(&[Vector3::new(2.0, 0.0, 1.0)], &cam, &pose);
        assert!(!got[0].valid);
    }

    #[test]
    fn optical_axis_point_hits_principal_point() {
        let cam = test_fisheye();
        let got =
            project_reference_points(&[Vector3::new(0.0, 0.0, 10.0)], &cam, &Pose::identity());
        assert!(got[0].valid);
        assert_relative_eq!(got[0].u, cam.cx, epsilon = 1e-9);
        assert_relative_eq!(got[0].v, cam.cy, epsilon = 1e-9);
    }

    #[test]
    fn projection_recovers_lifted_pixels() {
        let cam = test_fisheye();
        let pose = Pose::new(
            Quaternion::from_axis_angle(Vector3::z(), -0.3),
            Vector3::new(0.5, 0.2, 1.0),
        );
        let depths = [2.0, 9.0];
        let rays = generate_ray_grid(&cam, 8, &depths).unwrap();
        let features = FeatureGrid::ones(rays.n_u, rays.n_v, 1);
        let cloud = lift_frustum(&cam, &pose, 8, &depths, &features, 0).unwrap();
        let pixels = project_reference_points(&cloud.positions, &cam, &pose);
        let mut k = 0;
        for fp in rays.points.iter().filter(|p| p.valid) {
            let r = &pixels[k];
            assert!(r.valid);
            assert!((r.u - f64::from(fp.u)).abs() < 1e-5);
            assert!((r.v - f64::from(fp.v)).abs() < 1e-5);
            k += 1;
        }
        assert_eq!(k, pixels.len());
    }

    #[test]
    fn pe_modes_share_the_point_set() {
        let cam = test_fisheye();
        let grid = polar_grid();
        let depths = [1.0, 4.0, 9.0];
        let cart = petr_pe_inputs(
            &cam,
            &Pose::identity(),
            8,
            &depths,
            &grid,
            PeMode::Cartesian,
        )
        .unwrap();
        let polar =
            petr_pe_inputs(&cam, &Pose::identity(), 8, &depths, &grid, PeMode::Polar).unwrap();
        assert_eq!(cart.valid, polar.valid);
        assert_eq!(cart.enc_len, 3);
        assert_eq!(polar.enc_len, 4);
        assert_eq!(
            (cart.n_u, cart.n_v, cart.n_d),
            (polar.n_u, polar.n_v, polar.n_d)
        );
    }

    #[test]
    fn pe_cartesian_center_normalizes_to_half() {
        // Ego point (0,0,z_mid) under symmetric ranges -> (0.5, 0.5, 0.5).
        let grid = BevGrid::Cartesian(CartesianGrid {
            x_min: -40.0,
            x_max: 40.0,
            y_min: -40.0,
            y_max: 40.0,
            n_x: 8,
            n_y: 8,
            z_min: -2.0,
            z_max: 6.0,
        });
        // Camera at ego origin looking straight down so the axis ray hits
        // (0, 0, z) points; place it so the first depth lands at z_mid = 2.
        let cam = MeiCamera::pinhole(10.0, 10.0, 0.0, 0.0, 1, 1);
        let pose = Pose::new(
            Quaternion::from_axis_angle(Vector3::x(), std::f64::consts::PI),
            Vector3::new(0.0, 0.0, 5.0),
        );
        let pe = petr_pe_inputs(&cam, &pose, 1, &[3.0], &grid, PeMode::Cartesian).unwrap();
        assert!(pe.valid[0]);
        let e = pe.encoding(0);
        assert_relative_eq!(e[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(e[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(e[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn pe_polar_requires_polar_grid() {
        let cam = test_fisheye();
        let grid = BevGrid::Cartesian(CartesianGrid {
            x_min: -1.0,
            x_max: 1.0,
            y_min: -1.0,
            y_max: 1.0,
            n_x: 2,
            n_y: 2,
            z_min: 0.0,
            z_max: 1.0,
        });
        assert!(matches!(
            petr_pe_inputs(&cam, &Pose::identity(), 8, &[1.0], &grid, PeMode::Polar),
            Err(Error::NotPolar)
        ));
    }

    #[test]
    fn cloud_binary_round_trip() {
        let cloud = random_cloud(5, 40);
        let mut buf = Vec::new();
        cloud.write_binary(&mut buf).unwrap();
        let back = FeatureCloud::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn map_binary_round_trip() {
        let map = splat(&random_cloud(9, 60), &polar_grid()).unwrap();
        let mut buf = Vec::new();
        map.write_binary(&mut buf).unwrap();
        let back = BevFeatureMap::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, map);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn splat_mass_conservation(seed in 0u64..1000) {
            let grid = polar_grid();
            let cloud = random_cloud(seed, 200);
            let map = splat(&cloud, &grid).unwrap();
            for c in 0..cloud.channels {
                let want: f64 = (0..cloud.len())
                    .filter(|&i| splat_bin(&grid, &cloud.positions[i]).is_some())
                    .map(|i| cloud.feature(i)[c])
                    .sum();
                let got = map.channel_sum(c);
                let denom = want.abs().max(1e-12);
                prop_assert!(((got - want) / denom).abs() < 1e-6);
            }
        }
    }
}
