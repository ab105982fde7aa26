//! KITTI-360-style to nuScenes-style annotation conversion.
//!
//! Three steps: partition each trajectory into scene windows by arc
//! length, identify keyframes (a registered pose plus synchronized data
//! on every configured sensor), then attach annotations — static objects
//! via distance and LiDAR-visibility checks, dynamic objects directly —
//! transforming boxes into the ego frame of their sample.

mod classmap;
mod records;
mod source;

pub use classmap::{all_categories, map_classes, EVAL_CLASSES};
pub use records::{
    token, visibility_rows, visibility_token_for, AttributeRow, CalibratedSensorRow, CategoryRow,
    EgoPoseRow, MeiParams, RecordSet, SampleAnnotationRow, SampleDataRow, SampleRow, SceneRow,
    VisibilityRow,
};
pub use source::{discover_sequences, load_sequence, SourceObject, SourceSequence};

use crate::boxes::{Box3D, BoxFrame};
use crate::camera::MeiCamera;
use crate::error::{Error, Result};
use crate::geometry::Pose;
use nalgebra::Vector3;
use std::collections::BTreeMap;
use std::path::Path;

/// Conversion thresholds. All units SI.
#[derive(Debug, Clone)]
pub struct ConvertOptions {
    /// Scene window length along the trajectory, meters.
    pub window_m: f64,
    /// Maximum ego-to-center distance for static-object assignment, meters.
    pub d_max: f64,
    /// Minimum interior LiDAR points for static-object assignment.
    pub min_pts: usize,
    /// Sensor synchronization tolerance, seconds.
    pub sync_tol: f64,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions {
            window_m: 200.0,
            d_max: 80.0,
            min_pts: 1,
            sync_tol: 0.010,
        }
    }
}

/// The sensor set a conversion synchronizes against and calibrates.
#[derive(Debug, Clone, Default)]
pub struct SensorRig {
    pub cameras: Vec<RigCamera>,
    pub lidar: Option<RigLidar>,
}

#[derive(Debug, Clone)]
pub struct RigCamera {
    pub name: String,
    pub camera: MeiCamera,
    /// Camera-to-ego.
    pub pose: Pose,
}

#[derive(Debug, Clone)]
pub struct RigLidar {
    pub name: String,
    /// Lidar-to-ego.
    pub pose: Pose,
}

impl SensorRig {
    pub fn sensor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.cameras.iter().map(|c| c.name.clone()).collect();
        if let Some(l) = &self.lidar {
            names.push(l.name.clone());
        }
        names
    }
}

/// Contiguous run of posed frames covering one window of trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpan {
    pub frames: Vec<u64>,
    pub arc_length: f64,
}

/// Split a trajectory into scene windows by cumulative arc length.
///
/// Spans are contiguous, non-overlapping and cover every posed frame. A
/// final window shorter than `window_m / 2` merges into the previous
/// scene; a zero-length trajectory yields a single scene.
pub fn partition_scenes(seq: &SourceSequence, window_m: f64) -> Vec<SceneSpan> {
    let mut spans: Vec<SceneSpan> = Vec::new();
    if seq.poses.is_empty() {
        return spans;
    }
    let mut frames = vec![seq.poses[0].0];
    let mut length = 0.0;
    for w in seq.poses.windows(2) {
        frames.push(w[1].0);
        length += (w[1].1.translation - w[0].1.translation).norm();
        if length >= window_m {
            spans.push(SceneSpan {
                frames: std::mem::take(&mut frames),
                arc_length: length,
            });
            length = 0.0;
        }
    }
    if !frames.is_empty() {
        if length < window_m / 2.0 && !spans.is_empty() {
            let last = spans.last_mut().unwrap();
            last.frames.append(&mut frames);
            last.arc_length += length;
        } else {
            spans.push(SceneSpan {
                frames,
                arc_length: length,
            });
        }
    }
    spans
}

/// Keyframe (sample) identification: a frame qualifies when it has a
/// georegistered pose, a canonical timestamp, and every rig sensor holds
/// data for it within `sync_tol` seconds of the canonical time.
pub fn identify_keyframes(seq: &SourceSequence, rig: &SensorRig, sync_tol: f64) -> Vec<u64> {
    let tol_us = (sync_tol * 1e6).round() as i64;
    let names = rig.sensor_names();
    seq.poses
        .iter()
        .map(|(f, _)| *f)
        .filter(|frame| {
            let Some(&t0) = seq.frame_timestamps.get(frame) else {
                return false;
            };
            names.iter().all(|name| {
                seq.sensor_timestamps
                    .get(name)
                    .and_then(|m| m.get(frame))
                    .is_some_and(|&ts| (ts as i64 - t0 as i64).abs() <= tol_us)
            })
        })
        .collect()
}

/// Static-object assignment for one sample.
///
/// A box attaches when its global center lies within `d_max` meters of
/// the ego position and at least `min_pts` LiDAR points (ego frame) fall
/// inside it. Attached boxes come back in the ego frame together with
/// their interior point count.
pub fn assign_static_objects(
    boxes: &[(u32, Box3D)],
    ego_pose: &Pose,
    lidar_ego: &[Vector3<f64>],
    d_max: f64,
    min_pts: usize,
) -> Vec<(u32, Box3D, u32)> {
    boxes
        .iter()
        .filter_map(|(index, global)| {
            debug_assert_eq!(global.frame, BoxFrame::Global);
            if (global.center - ego_pose.translation).norm() > d_max {
                return None;
            }
            let ego_box = global.into_ego(ego_pose);
            let n_pts = lidar_ego.iter().filter(|p| ego_box.contains(**p)).count();
            if n_pts < min_pts {
                return None;
            }
            Some((*index, ego_box, n_pts as u32))
        })
        .collect()
}

fn interior_points(b: &Box3D, lidar_ego: &[Vector3<f64>]) -> u32 {
    lidar_ego.iter().filter(|p| b.contains(**p)).count() as u32
}

fn to_global_box(obj: &SourceObject, category: &str) -> Box3D {
    Box3D {
        center: obj.center,
        frame: BoxFrame::Global,
        size: obj.size,
        orientation: obj.rotation.canonicalize(),
        category: category.to_string(),
        velocity: obj.velocity,
        visibility: obj.visibility,
    }
}

/// Totals reported by a conversion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvertSummary {
    pub scenes: usize,
    pub samples: usize,
    pub annotations: usize,
}

fn calibrated_sensor_rows(rig: &SensorRig) -> Result<Vec<CalibratedSensorRow>> {
    let mut rows = Vec::new();
    for cam in &rig.cameras {
        let params =
            serde_json::to_string(&cam.camera).map_err(|e| Error::Format(e.to_string()))?;
        rows.push(CalibratedSensorRow {
            token: token(&["calibrated_sensor", &cam.name, &params]),
            sensor_name: cam.name.clone(),
            modality: "camera".into(),
            translation: cam.pose.translation.into(),
            rotation: [
                cam.pose.rotation.w,
                cam.pose.rotation.x,
                cam.pose.rotation.y,
                cam.pose.rotation.z,
            ],
            camera_intrinsic: vec![
                vec![cam.camera.fx, 0.0, cam.camera.cx],
                vec![0.0, cam.camera.fy, cam.camera.cy],
                vec![0.0, 0.0, 1.0],
            ],
            camera_model: Some(MeiParams {
                xi: cam.camera.xi,
                k1: cam.camera.k1,
                k2: cam.camera.k2,
                width: cam.camera.width,
                height: cam.camera.height,
                crop_u0: cam.camera.crop_u0,
                crop_v0: cam.camera.crop_v0,
            }),
        });
    }
    if let Some(lidar) = &rig.lidar {
        rows.push(CalibratedSensorRow {
            token: token(&["calibrated_sensor", &lidar.name, "lidar"]),
            sensor_name: lidar.name.clone(),
            modality: "lidar".into(),
            translation: lidar.pose.translation.into(),
            rotation: [
                lidar.pose.rotation.w,
                lidar.pose.rotation.x,
                lidar.pose.rotation.y,
                lidar.pose.rotation.z,
            ],
            camera_intrinsic: Vec::new(),
            camera_model: None,
        });
    }
    Ok(rows)
}

/// Convert one sequence into record rows, appending to `rs`.
fn convert_sequence(
    seq: &SourceSequence,
    rig: &SensorRig,
    opts: &ConvertOptions,
    rs: &mut RecordSet,
    summary: &mut ConvertSummary,
) -> Result<()> {
    // Map every label up front so unknown labels fail the conversion
    // before anything is emitted.
    let mut static_boxes: Vec<(u32, Box3D)> = Vec::new();
    let mut dynamic_by_frame: BTreeMap<u64, Vec<(u32, Box3D)>> = BTreeMap::new();
    for obj in &seq.objects {
        let (category, _ext) = map_classes(&obj.label)?;
        let b = to_global_box(obj, category);
        b.validate()?;
        match obj.frame {
            None => static_boxes.push((obj.index, b)),
            Some(frame) => dynamic_by_frame
                .entry(frame)
                .or_default()
                .push((obj.index, b)),
        }
    }

    let keyframes = identify_keyframes(seq, rig, opts.sync_tol);
    let spans = partition_scenes(seq, opts.window_m);
    let sensor_rows = calibrated_sensor_rows(rig)?;

    // Annotation chains link the same object across consecutive samples.
    let mut annotations_by_object: BTreeMap<u32, Vec<usize>> = BTreeMap::new();

    for (scene_idx, span) in spans.iter().enumerate() {
        let sample_frames: Vec<u64> = span
            .frames
            .iter()
            .copied()
            .filter(|f| keyframes.contains(f))
            .collect();
        if sample_frames.is_empty() {
            continue;
        }
        let scene_token = token(&["scene", &seq.id, &scene_idx.to_string()]);
        let sample_tokens: Vec<String> = sample_frames
            .iter()
            .map(|f| token(&["sample", &seq.id, &f.to_string()]))
            .collect();

        rs.scenes.push(SceneRow {
            token: scene_token.clone(),
            name: format!("{}-{:04}", seq.id, scene_idx),
            description: format!("{:.1} m window", span.arc_length),
            nbr_samples: sample_frames.len() as u32,
            first_sample_token: sample_tokens.first().unwrap().clone(),
            last_sample_token: sample_tokens.last().unwrap().clone(),
        });
        summary.scenes += 1;

        for (i, (&frame, sample_token)) in sample_frames.iter().zip(&sample_tokens).enumerate() {
            let timestamp = seq.frame_timestamps[&frame];
            let ego_pose = *seq.pose_for(frame).expect("keyframes are posed");
            let ego_pose_token = token(&["ego_pose", &seq.id, &frame.to_string()]);

            rs.samples.push(SampleRow {
                token: sample_token.clone(),
                timestamp,
                scene_token: scene_token.clone(),
                prev: if i > 0 {
                    sample_tokens[i - 1].clone()
                } else {
                    String::new()
                },
                next: if i + 1 < sample_tokens.len() {
                    sample_tokens[i + 1].clone()
                } else {
                    String::new()
                },
            });
            summary.samples += 1;

            rs.ego_poses.push(EgoPoseRow {
                token: ego_pose_token.clone(),
                timestamp,
                translation: ego_pose.translation.into(),
                rotation: [
                    ego_pose.rotation.w,
                    ego_pose.rotation.x,
                    ego_pose.rotation.y,
                    ego_pose.rotation.z,
                ],
            });

            for sensor in &sensor_rows {
                let data_token = token(&[
                    "sample_data",
                    &seq.id,
                    &frame.to_string(),
                    &sensor.sensor_name,
                ]);
                let prev_token = if i > 0 {
                    token(&[
                        "sample_data",
                        &seq.id,
                        &sample_frames[i - 1].to_string(),
                        &sensor.sensor_name,
                    ])
                } else {
                    String::new()
                };
                let next_token = if i + 1 < sample_frames.len() {
                    token(&[
                        "sample_data",
                        &seq.id,
                        &sample_frames[i + 1].to_string(),
                        &sensor.sensor_name,
                    ])
                } else {
                    String::new()
                };
                let (filename, fileformat, width, height) = if sensor.modality == "camera" {
                    let model = sensor.camera_model.as_ref().unwrap();
                    (
                        format!("{}/images/{}/{:010}.png", seq.id, sensor.sensor_name, frame),
                        "png".to_string(),
                        model.width,
                        model.height,
                    )
                } else {
                    (
                        format!("{}/lidar/{:010}.bin", seq.id, frame),
                        "bin".to_string(),
                        0,
                        0,
                    )
                };
                rs.sample_datas.push(SampleDataRow {
                    token: data_token,
                    sample_token: sample_token.clone(),
                    ego_pose_token: ego_pose_token.clone(),
                    calibrated_sensor_token: sensor.token.clone(),
                    filename,
                    fileformat,
                    width,
                    height,
                    timestamp: seq.sensor_timestamps[&sensor.sensor_name][&frame],
                    is_key_frame: true,
                    prev: prev_token,
                    next: next_token,
                });
            }

            // LiDAR points in the ego frame, for visibility checks.
            let lidar_ego: Vec<Vector3<f64>> = match &rig.lidar {
                Some(l) => seq
                    .lidar_points(frame)?
                    .iter()
                    .map(|p| l.pose.transform_point(*p))
                    .collect(),
                None => Vec::new(),
            };

            let mut attached: Vec<(u32, Box3D, u32)> = assign_static_objects(
                &static_boxes,
                &ego_pose,
                &lidar_ego,
                opts.d_max,
                opts.min_pts,
            );
            // Dynamic objects are already per-frame; they convert directly.
            if let Some(dynamics) = dynamic_by_frame.get(&frame) {
                for (index, b) in dynamics {
                    let ego_box = b.into_ego(&ego_pose);
                    let n_pts = interior_points(&ego_box, &lidar_ego);
                    attached.push((*index, ego_box, n_pts));
                }
            }

            for (index, ego_box, n_pts) in attached {
                let ann_token = token(&[
                    "annotation",
                    &seq.id,
                    &frame.to_string(),
                    &index.to_string(),
                ]);
                rs.annotations.push(SampleAnnotationRow {
                    token: ann_token,
                    sample_token: sample_token.clone(),
                    category_token: token(&["category", &ego_box.category]),
                    attribute_tokens: Vec::new(),
                    visibility_token: visibility_token_for(ego_box.visibility),
                    frame: "ego".into(),
                    translation: ego_box.center.into(),
                    size: ego_box.size,
                    rotation: [
                        ego_box.orientation.w,
                        ego_box.orientation.x,
                        ego_box.orientation.y,
                        ego_box.orientation.z,
                    ],
                    velocity: ego_box.velocity,
                    num_lidar_pts: n_pts,
                    prev: String::new(),
                    next: String::new(),
                });
                summary.annotations += 1;
                annotations_by_object
                    .entry(index)
                    .or_default()
                    .push(rs.annotations.len() - 1);
            }
        }
    }

    // Link each object's annotations across samples in emission order
    // (samples were walked in timestamp order).
    for indices in annotations_by_object.values() {
        for k in 0..indices.len() {
            if k > 0 {
                rs.annotations[indices[k]].prev = rs.annotations[indices[k - 1]].token.clone();
            }
            if k + 1 < indices.len() {
                rs.annotations[indices[k]].next = rs.annotations[indices[k + 1]].token.clone();
            }
        }
    }
    Ok(())
}

/// Convert every sequence under `src_root` into one record set.
///
/// Rig-derived tables (calibrated sensors, categories, visibility) are
/// always present; an empty source yields empty per-sample tables with
/// the schema intact.
pub fn convert_tree(
    src_root: &Path,
    rig: &SensorRig,
    opts: &ConvertOptions,
) -> Result<(RecordSet, ConvertSummary)> {
    let mut rs = RecordSet {
        calibrated_sensors: calibrated_sensor_rows(rig)?,
        categories: all_categories()
            .into_iter()
            .map(|(name, extension)| CategoryRow {
                token: token(&["category", name]),
                name: name.to_string(),
                description: if extension {
                    format!("{name} (extension category)")
                } else {
                    format!("{name} (shared detection class)")
                },
                extension,
            })
            .collect(),
        visibility: visibility_rows(),
        ..Default::default()
    };
    let mut summary = ConvertSummary::default();
    for dir in discover_sequences(src_root)? {
        let seq = load_sequence(&dir)?;
        convert_sequence(&seq, rig, opts, &mut rs, &mut summary)?;
    }
    rs.validate_integrity()?;
    Ok((rs, summary))
}
