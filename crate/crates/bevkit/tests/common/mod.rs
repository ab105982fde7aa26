//! Shared synthetic fixture: a two-scene / five-sample / seven-annotation
//! source tree plus a matching toolkit config.
//!
//! The sequence drives 350 m in a straight line (8 posed frames, 50 m
//! apart), which partitions into a 200 m scene and a 150 m tail scene.
//! Frames 1, 3 and 6 fail keyframe identification (missing camera entry,
//! 50 ms camera skew, missing lidar entry), leaving samples
//! {0, 2, 4, 5, 7}. Seven annotations come from a lidar-visible pole
//! (frame 0), a traffic sign seen twice (frames 4, 5), a dynamic car
//! (frames 0, 4, 5) and a pedestrian (frame 7); a far building and a
//! lidar-shadowed pole are never attached.

#![allow(dead_code)]

use bevkit::config::{CameraEntry, LidarEntry, ToolkitConfig};
use bevkit::geometry::Quaternion;
use nalgebra::Vector3;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

pub fn quat_wxyz(q: Quaternion) -> [f64; 4] {
    [q.w, q.x, q.y, q.z]
}

/// Camera-to-ego rotation of a forward-looking camera
/// (camera z -> ego x, camera x -> ego -y, camera y -> ego -z).
pub fn forward_camera_rotation() -> Quaternion {
    Quaternion::new(0.5, -0.5, 0.5, -0.5)
}

/// Left-mounted camera: optical axis along ego +y.
pub fn left_camera_rotation() -> Quaternion {
    Quaternion::from_axis_angle(Vector3::x(), -FRAC_PI_2)
}

/// Right-mounted camera: optical axis along ego -y.
pub fn right_camera_rotation() -> Quaternion {
    Quaternion::from_axis_angle(Vector3::z(), PI)
        .multiply(Quaternion::from_axis_angle(Vector3::x(), -FRAC_PI_2))
}

/// KITTI-360-like six-sensor config: stereo pinholes, two fisheyes, lidar.
pub fn toolkit_config() -> ToolkitConfig {
    let pinhole = |name: &str, ty: f64| CameraEntry {
        name: name.into(),
        xi: 0.0,
        k1: 0.0,
        k2: 0.0,
        fx: 552.554,
        fy: 552.554,
        cx: 704.0,
        cy: 188.0,
        width: 1408,
        height: 376,
        crop_u0: 0.0,
        crop_v0: 0.0,
        translation: [1.6, ty, 1.55],
        rotation: quat_wxyz(forward_camera_rotation()),
    };
    let fisheye = |name: &str, ty: f64, rot: Quaternion| CameraEntry {
        name: name.into(),
        xi: 2.2134,
        k1: 0.0168,
        k2: 1.6548,
        fx: 1336.3,
        fy: 1335.8,
        cx: 716.94,
        cy: 705.76,
        width: 1400,
        height: 1400,
        crop_u0: 0.0,
        crop_v0: 0.0,
        translation: [0.8, ty, 1.4],
        rotation: quat_wxyz(rot),
    };
    let body = r#"
[grid]
mode = "polar"
rho_max = 51.2
n_theta = 16
n_rho = 8
z_min = -5.0
z_max = 3.0

[depths]
min = 1.0
max = 61.0
count = 16

[converter]
window_m = 200.0
d_max = 80.0
min_pts = 1
sync_tol = 0.010

[rectification]
front_focal = 552.554
virtual_width = 704
virtual_height = 376
"#;
    let mut cfg: ToolkitConfig = toml::from_str(body).expect("base config");
    cfg.cameras = vec![
        pinhole("cam_front_left", 0.3),
        pinhole("cam_front_right", -0.3),
        fisheye("fisheye_left", 0.8, left_camera_rotation()),
        fisheye("fisheye_right", -0.8, right_camera_rotation()),
    ];
    cfg.lidar = Some(LidarEntry {
        name: "lidar_top".into(),
        translation: [0.0, 0.0, 1.8],
        rotation: [1.0, 0.0, 0.0, 0.0],
    });
    cfg
}

pub fn write_config(path: &Path) {
    let cfg = toolkit_config();
    let body = toml::to_string_pretty(&cfg).expect("serialize config");
    std::fs::write(path, body).expect("write config");
}

fn lidar_bin(points: &[[f32; 3]]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(points.len() * 16);
    for p in points {
        for v in [p[0], p[1], p[2], 1.0f32] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

/// Write the synthetic source tree under `root/seq00`.
pub fn write_source_tree(root: &Path) {
    let seq = root.join("seq00");
    let sensors = seq.join("sensors");
    let lidar = seq.join("lidar");
    std::fs::create_dir_all(&sensors).unwrap();
    std::fs::create_dir_all(&lidar).unwrap();

    // 8 posed frames, 50 m apart along +x: scenes split 200 m + 150 m.
    let mut poses = String::new();
    let mut times = String::new();
    for f in 0..8u64 {
        let x = 50.0 * f as f64;
        poses.push_str(&format!("{f} 1 0 0 {x} 0 1 0 0 0 0 1 0\n"));
        times.push_str(&format!("{f} {}\n", 1_000_000 + f * 100_000));
    }
    std::fs::write(seq.join("poses.txt"), poses).unwrap();
    std::fs::write(seq.join("timestamps.txt"), times).unwrap();

    // Both stereo cameras share one sync index here; the fisheyes and
    // lidar have their own. Frame 1 has no camera data, frame 3 is 50 ms
    // out of sync, frame 6 has no lidar return.
    let mut cam = String::new();
    let mut fish = String::new();
    let mut lid = String::new();
    for f in 0..8u64 {
        let t = 1_000_000 + f * 100_000;
        match f {
            1 => {}
            3 => cam.push_str(&format!("{f} {}\n", t + 50_000)),
            _ => cam.push_str(&format!("{f} {}\n", t + 2_000)),
        }
        if f != 1 {
            fish.push_str(&format!("{f} {}\n", t + 1_000));
        }
        if f != 6 {
            lid.push_str(&format!("{f} {t}\n"));
        }
    }
    for name in ["cam_front_left", "cam_front_right"] {
        std::fs::write(sensors.join(format!("{name}.txt")), &cam).unwrap();
    }
    for name in ["fisheye_left", "fisheye_right"] {
        std::fs::write(sensors.join(format!("{name}.txt")), &fish).unwrap();
    }
    std::fs::write(sensors.join("lidar_top.txt"), &lid).unwrap();

    // Lidar returns, in the lidar frame (ego +1.8 m z offset):
    // frame 0 sees the near pole, frames 4 and 5 see the traffic sign.
    std::fs::write(
        lidar.join(format!("{:010}.bin", 0)),
        lidar_bin(&[
            [10.0, 3.0, -0.5],
            [10.05, 3.05, 0.1],
            [10.0, 2.95, 0.9],
            [30.0, -10.0, 0.0],
        ]),
    )
    .unwrap();
    std::fs::write(
        lidar.join(format!("{:010}.bin", 4)),
        lidar_bin(&[[5.0, -4.0, 0.45], [5.05, -3.95, 0.3], [-20.0, 6.0, 0.2]]),
    )
    .unwrap();
    std::fs::write(
        lidar.join(format!("{:010}.bin", 5)),
        lidar_bin(&[[-45.0, -4.0, 0.45], [12.0, 9.0, -1.0]]),
    )
    .unwrap();

    let annotations = r#"<annotations>
  <object>
    <index>0</index>
    <label>pole</label>
    <timestamp>-1</timestamp>
    <center>10.0 3.0 1.0</center>
    <size>0.4 0.4 4.0</size>
    <rotation>1 0 0 0</rotation>
  </object>
  <object>
    <index>1</index>
    <label>trafficSign</label>
    <timestamp>-1</timestamp>
    <center>205.0 -4.0 2.0</center>
    <size>0.5 0.5 1.2</size>
    <rotation>1 0 0 0</rotation>
    <visibility>0.9</visibility>
  </object>
  <object>
    <index>2</index>
    <label>car</label>
    <timestamp>0</timestamp>
    <center>20.0 2.0 0.8</center>
    <size>1.8 4.5 1.6</size>
    <rotation>0.9238795325112867 0 0 0.3826834323650898</rotation>
    <velocity>5.0 0.0</velocity>
  </object>
  <object>
    <index>2</index>
    <label>car</label>
    <timestamp>4</timestamp>
    <center>220.0 2.0 0.8</center>
    <size>1.8 4.5 1.6</size>
    <rotation>0.9238795325112867 0 0 0.3826834323650898</rotation>
    <velocity>5.0 0.0</velocity>
  </object>
  <object>
    <index>2</index>
    <label>car</label>
    <timestamp>5</timestamp>
    <center>270.0 2.0 0.8</center>
    <size>1.8 4.5 1.6</size>
    <rotation>0.9238795325112867 0 0 0.3826834323650898</rotation>
    <velocity>5.0 0.0</velocity>
  </object>
  <object>
    <index>3</index>
    <label>person</label>
    <timestamp>7</timestamp>
    <center>355.0 -2.0 0.9</center>
    <size>0.6 0.6 1.8</size>
    <rotation>1 0 0 0</rotation>
    <velocity>0.5 1.0</velocity>
  </object>
  <object>
    <index>4</index>
    <label>building</label>
    <timestamp>-1</timestamp>
    <center>800.0 0.0 5.0</center>
    <size>20.0 30.0 10.0</size>
    <rotation>1 0 0 0</rotation>
  </object>
  <object>
    <index>5</index>
    <label>pole</label>
    <timestamp>-1</timestamp>
    <center>12.0 -5.0 1.0</center>
    <size>0.4 0.4 4.0</size>
    <rotation>1 0 0 0</rotation>
  </object>
</annotations>
"#;
    std::fs::write(seq.join("annotations.xml"), annotations).unwrap();
}

/// Detections identical to the record set's ground truth, scored 1.0.
pub fn perfect_detection_file(rs: &bevkit::convert::RecordSet) -> bevkit::eval::DetectionFile {
    let mut results: std::collections::BTreeMap<String, Vec<bevkit::eval::DetectionJson>> =
        std::collections::BTreeMap::new();
    for s in &rs.samples {
        results.entry(s.token.clone()).or_default();
    }
    for gt in rs.ground_truth() {
        results
            .entry(gt.sample_token.clone())
            .or_default()
            .push(bevkit::eval::DetectionJson {
                translation: gt.bbox.center.into(),
                size: gt.bbox.size,
                rotation: [
                    gt.bbox.orientation.w,
                    gt.bbox.orientation.x,
                    gt.bbox.orientation.y,
                    gt.bbox.orientation.z,
                ],
                velocity: gt.bbox.velocity,
                detection_name: gt.bbox.category.clone(),
                detection_score: 1.0,
            });
    }
    bevkit::eval::DetectionFile { results }
}
