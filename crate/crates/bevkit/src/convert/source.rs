//! Readers for the KITTI-360-style source tree.
//!
//! A sequence directory holds:
//!
//! ```text
//! <sequence>/
//!   poses.txt          frame + row-major 3x4 rigid transform (ego -> world),
//!                      georegistered frames only
//!   timestamps.txt     frame + canonical timestamp in integer microseconds
//!   sensors/<name>.txt frame + capture timestamp, for frames with data
//!   annotations.xml    object records (see below)
//!   lidar/<frame>.bin  optional; little-endian f32 x y z intensity,
//!                      lidar sensor frame
//! ```
//!
//! Static objects carry `<timestamp>-1</timestamp>` and a single global
//! placement; dynamic objects carry one record per frame. Field-by-field
//! documentation lives in `docs/FORMATS.md`.

use crate::error::{Error, Result};
use crate::geometry::{Pose, Quaternion};
use nalgebra::{Matrix3, Vector3};
use quick_xml::events::Event;
use quick_xml::Reader;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// One annotated object record from the source tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceObject {
    /// Identity of the object within its sequence; dynamic objects repeat
    /// the same index across frames.
    pub index: u32,
    pub label: String,
    /// `None` for static objects labeled once globally.
    pub frame: Option<u64>,
    pub center: Vector3<f64>,
    /// `(w, l, h)` meters.
    pub size: [f64; 3],
    pub rotation: Quaternion,
    pub velocity: Option<[f64; 2]>,
    pub visibility: f64,
}

/// One source sequence: poses, timestamps, sensor indices and annotations.
#[derive(Debug, Clone)]
pub struct SourceSequence {
    pub id: String,
    /// Canonical frame timestamps in microseconds.
    pub frame_timestamps: BTreeMap<u64, u64>,
    /// Georegistered ego poses (ego -> world), sorted by frame.
    pub poses: Vec<(u64, Pose)>,
    /// Per-sensor capture timestamps, microseconds.
    pub sensor_timestamps: BTreeMap<String, BTreeMap<u64, u64>>,
    pub objects: Vec<SourceObject>,
    /// Directory holding per-frame LiDAR payloads, when present.
    pub lidar_dir: Option<PathBuf>,
}

impl SourceSequence {
    pub fn pose_for(&self, frame: u64) -> Option<&Pose> {
        self.poses
            .binary_search_by_key(&frame, |(f, _)| *f)
            .ok()
            .map(|i| &self.poses[i].1)
    }

    /// LiDAR points of one frame in the lidar sensor frame; empty when
    /// the payload is absent.
    pub fn lidar_points(&self, frame: u64) -> Result<Vec<Vector3<f64>>> {
        let Some(dir) = &self.lidar_dir else {
            return Ok(Vec::new());
        };
        let path = dir.join(format!("{frame:010}.bin"));
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_lidar_bin(&path)
    }
}

fn parse_floats(path: &Path, line_no: usize, s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|_| {
                Error::parse(
                    path.display().to_string(),
                    format!("line {line_no}: bad number `{t}`"),
                )
            })
        })
        .collect()
}

/// Parse `frame value...` lines, skipping blanks and `#` comments.
fn parse_indexed_lines(path: &Path) -> Result<Vec<(u64, Vec<f64>)>> {
    let content = std::fs::read_to_string(path).map_err(Error::io_at(path))?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let frame: u64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| {
            Error::parse(
                path.display().to_string(),
                format!("line {}: missing frame index", i + 1),
            )
        })?;
        let rest = parts.collect::<Vec<_>>().join(" ");
        out.push((frame, parse_floats(path, i + 1, &rest)?));
    }
    Ok(out)
}

fn load_poses(path: &Path) -> Result<Vec<(u64, Pose)>> {
    let mut poses = Vec::new();
    for (frame, vals) in parse_indexed_lines(path)? {
        if vals.len() != 12 {
            return Err(Error::parse(
                path.display().to_string(),
                format!(
                    "frame {frame}: expected 12 transform values, got {}",
                    vals.len()
                ),
            ));
        }
        let rot = Matrix3::new(
            vals[0], vals[1], vals[2], vals[4], vals[5], vals[6], vals[8], vals[9], vals[10],
        );
        poses.push((
            frame,
            Pose::new(
                Quaternion::from_rotation_matrix(&rot),
                Vector3::new(vals[3], vals[7], vals[11]),
            ),
        ));
    }
    poses.sort_by_key(|(f, _)| *f);
    Ok(poses)
}

fn load_timestamps(path: &Path) -> Result<BTreeMap<u64, u64>> {
    let mut map = BTreeMap::new();
    for (frame, vals) in parse_indexed_lines(path)? {
        if vals.len() != 1 || vals[0] < 0.0 {
            return Err(Error::parse(
                path.display().to_string(),
                format!("frame {frame}: expected one non-negative timestamp"),
            ));
        }
        map.insert(frame, vals[0] as u64);
    }
    Ok(map)
}

fn read_lidar_bin(path: &Path) -> Result<Vec<Vector3<f64>>> {
    let bytes = std::fs::read(path).map_err(Error::io_at(path))?;
    if bytes.len() % 16 != 0 {
        return Err(Error::parse(
            path.display().to_string(),
            format!("length {} is not a multiple of 16 bytes", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let f = |o: usize| f64::from(f32::from_le_bytes([c[o], c[o + 1], c[o + 2], c[o + 3]]));
            Vector3::new(f(0), f(4), f(8))
        })
        .collect())
}

#[derive(Default)]
struct ObjectFields {
    index: Option<u32>,
    label: Option<String>,
    timestamp: Option<i64>,
    center: Option<Vector3<f64>>,
    size: Option<[f64; 3]>,
    rotation: Option<Quaternion>,
    velocity: Option<[f64; 2]>,
    visibility: Option<f64>,
}

impl ObjectFields {
    fn finish(self, path: &Path) -> Result<SourceObject> {
        let missing = |field: &str| {
            Error::parse(
                path.display().to_string(),
                format!("object is missing <{field}>"),
            )
        };
        let ts = self.timestamp.ok_or_else(|| missing("timestamp"))?;
        Ok(SourceObject {
            index: self.index.ok_or_else(|| missing("index"))?,
            label: self.label.ok_or_else(|| missing("label"))?,
            frame: if ts < 0 { None } else { Some(ts as u64) },
            center: self.center.ok_or_else(|| missing("center"))?,
            size: self.size.ok_or_else(|| missing("size"))?,
            rotation: self.rotation.ok_or_else(|| missing("rotation"))?,
            velocity: self.velocity,
            visibility: self.visibility.unwrap_or(1.0),
        })
    }
}

fn load_annotations(path: &Path) -> Result<Vec<SourceObject>> {
    let content = std::fs::read_to_string(path).map_err(Error::io_at(path))?;
    let mut reader = Reader::from_str(&content);
    let err = |msg: String| Error::parse(path.display().to_string(), msg);

    let mut objects = Vec::new();
    let mut current: Option<ObjectFields> = None;
    let mut tag: Option<String> = None;
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if name == "object" {
                    current = Some(ObjectFields::default());
                } else if current.is_some() {
                    tag = Some(name);
                }
            }
            Ok(Event::Text(t)) => {
                let text = t
                    .decode()
                    .map_err(|e| err(format!("bad text encoding: {e}")))?
                    .trim()
                    .to_string();
                if text.is_empty() {
                    continue;
                }
                let (Some(fields), Some(tag)) = (current.as_mut(), tag.as_deref()) else {
                    continue;
                };
                let nums = || -> Result<Vec<f64>> { parse_floats(path, 0, &text) };
                match tag {
                    "index" => {
                        fields.index = Some(
                            text.parse()
                                .map_err(|_| err(format!("bad <index> value `{text}`")))?,
                        )
                    }
                    "label" => fields.label = Some(text.clone()),
                    "timestamp" => {
                        fields.timestamp = Some(
                            text.parse()
                                .map_err(|_| err(format!("bad <timestamp> value `{text}`")))?,
                        )
                    }
                    "center" => {
                        let v = nums()?;
                        if v.len() != 3 {
                            return Err(err("<center> needs 3 values".into()));
                        }
                        fields.center = Some(Vector3::new(v[0], v[1], v[2]));
                    }
                    "size" => {
                        let v = nums()?;
                        if v.len() != 3 {
                            return Err(err("<size> needs 3 values (w l h)".into()));
                        }
                        fields.size = Some([v[0], v[1], v[2]]);
                    }
                    "rotation" => {
                        let v = nums()?;
                        if v.len() != 4 {
                            return Err(err("<rotation> needs 4 values (w x y z)".into()));
                        }
                        fields.rotation = Some(Quaternion::new(v[0], v[1], v[2], v[3]));
                    }
                    "velocity" => {
                        let v = nums()?;
                        if v.len() != 2 {
                            return Err(err("<velocity> needs 2 values".into()));
                        }
                        fields.velocity = Some([v[0], v[1]]);
                    }
                    "visibility" => {
                        fields.visibility = Some(
                            nums()?
                                .first()
                                .copied()
                                .ok_or_else(|| err("<visibility> needs 1 value".into()))?,
                        )
                    }
                    other => {
                        return Err(err(format!("unknown object field <{other}>")));
                    }
                }
            }
            Ok(Event::End(e)) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if name == "object" {
                    if let Some(fields) = current.take() {
                        objects.push(fields.finish(path)?);
                    }
                } else {
                    tag = None;
                }
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => return Err(err(format!("xml error: {e}"))),
        }
    }
    Ok(objects)
}

/// Load one sequence directory.
pub fn load_sequence(dir: &Path) -> Result<SourceSequence> {
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::parse(dir.display().to_string(), "not a directory"))?;

    let frame_timestamps = load_timestamps(&dir.join("timestamps.txt"))?;
    let poses = load_poses(&dir.join("poses.txt"))?;

    // Pose timestamps must be strictly increasing along the frame order.
    let mut last: Option<u64> = None;
    for (frame, _) in &poses {
        if let Some(&ts) = frame_timestamps.get(frame) {
            if let Some(prev) = last {
                if ts <= prev {
                    return Err(Error::parse(
                        dir.join("timestamps.txt").display().to_string(),
                        format!("pose timestamps not strictly increasing at frame {frame}"),
                    ));
                }
            }
            last = Some(ts);
        }
    }

    let mut sensor_timestamps = BTreeMap::new();
    let sensors_dir = dir.join("sensors");
    if sensors_dir.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&sensors_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        entries.sort();
        for path in entries {
            let name = path
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            sensor_timestamps.insert(name, load_timestamps(&path)?);
        }
    }

    let ann_path = dir.join("annotations.xml");
    let objects = if ann_path.exists() {
        load_annotations(&ann_path)?
    } else {
        Vec::new()
    };

    let lidar_dir = dir.join("lidar");
    Ok(SourceSequence {
        id,
        frame_timestamps,
        poses,
        sensor_timestamps,
        objects,
        lidar_dir: lidar_dir.is_dir().then_some(lidar_dir),
    })
}

/// Sequence subdirectories of a source root, sorted by name.
pub fn discover_sequences(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}
