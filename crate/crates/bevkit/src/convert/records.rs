//! Tokenized multi-table record sets in the nuScenes layout.
//!
//! Nine JSON tables, each an array of rows keyed by a token. Tokens are
//! content hashes (SHA-256 of a table-specific natural key, truncated to
//! 32 hex characters), so re-running a conversion reproduces every file
//! byte for byte. Rows are sorted by token before writing.
//!
//! One deliberate divergence from nuScenes: `sample_annotation` boxes are
//! stored in the ego frame of their sample (tagged by the `frame` field)
//! rather than the global frame. The schema is documented field by field
//! in `docs/FORMATS.md`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

/// Content-hash token: 32 lowercase hex characters.
pub fn token(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(32);
    for b in &digest[..16] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRow {
    pub token: String,
    pub name: String,
    pub description: String,
    pub nbr_samples: u32,
    pub first_sample_token: String,
    pub last_sample_token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRow {
    pub token: String,
    /// Microseconds.
    pub timestamp: u64,
    pub scene_token: String,
    pub prev: String,
    pub next: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleDataRow {
    pub token: String,
    pub sample_token: String,
    pub ego_pose_token: String,
    pub calibrated_sensor_token: String,
    /// Source-relative payload path; payloads are referenced, never copied.
    pub filename: String,
    pub fileformat: String,
    pub width: u32,
    pub height: u32,
    pub timestamp: u64,
    pub is_key_frame: bool,
    pub prev: String,
    pub next: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleAnnotationRow {
    pub token: String,
    pub sample_token: String,
    pub category_token: String,
    pub attribute_tokens: Vec<String>,
    pub visibility_token: String,
    /// Coordinate frame of `translation`/`rotation`; always `"ego"`.
    pub frame: String,
    pub translation: [f64; 3],
    /// `(w, l, h)` meters.
    pub size: [f64; 3],
    /// Unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
    pub velocity: Option<[f64; 2]>,
    pub num_lidar_pts: u32,
    pub prev: String,
    pub next: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedSensorRow {
    pub token: String,
    pub sensor_name: String,
    /// `camera` or `lidar`.
    pub modality: String,
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
    /// 3x3 row-major for cameras, empty for other modalities.
    pub camera_intrinsic: Vec<Vec<f64>>,
    /// Unified-model parameters for cameras.
    pub camera_model: Option<MeiParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeiParams {
    pub xi: f64,
    pub k1: f64,
    pub k2: f64,
    pub width: u32,
    pub height: u32,
    pub crop_u0: f64,
    pub crop_v0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoPoseRow {
    pub token: String,
    pub timestamp: u64,
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryRow {
    pub token: String,
    pub name: String,
    pub description: String,
    /// True for categories beyond the shared detection taxonomy.
    pub extension: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeRow {
    pub token: String,
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityRow {
    pub token: String,
    pub level: String,
    pub description: String,
}

/// The four visibility buckets, as `(level, lower bound incl., upper bound excl.)`.
const VISIBILITY_LEVELS: &[(&str, f64, f64)] = &[
    ("v0-40", 0.0, 0.4),
    ("v40-60", 0.4, 0.6),
    ("v60-80", 0.6, 0.8),
    ("v80-100", 0.8, f64::INFINITY),
];

pub fn visibility_rows() -> Vec<VisibilityRow> {
    VISIBILITY_LEVELS
        .iter()
        .map(|(level, lo, hi)| VisibilityRow {
            token: token(&["visibility", level]),
            level: (*level).to_string(),
            description: if hi.is_infinite() {
                format!("visible fraction in [{lo}, 1.0]")
            } else {
                format!("visible fraction in [{lo}, {hi})")
            },
        })
        .collect()
}

pub fn visibility_token_for(fraction: f64) -> String {
    let level = VISIBILITY_LEVELS
        .iter()
        .find(|(_, lo, hi)| fraction >= *lo && fraction < *hi)
        .map(|(l, _, _)| *l)
        .unwrap_or("v0-40");
    token(&["visibility", level])
}

/// A complete multi-table record set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordSet {
    pub scenes: Vec<SceneRow>,
    pub samples: Vec<SampleRow>,
    pub sample_datas: Vec<SampleDataRow>,
    pub annotations: Vec<SampleAnnotationRow>,
    pub calibrated_sensors: Vec<CalibratedSensorRow>,
    pub ego_poses: Vec<EgoPoseRow>,
    pub categories: Vec<CategoryRow>,
    pub attributes: Vec<AttributeRow>,
    pub visibility: Vec<VisibilityRow>,
}

const TABLE_FILES: &[&str] = &[
    "scene.json",
    "sample.json",
    "sample_data.json",
    "sample_annotation.json",
    "calibrated_sensor.json",
    "ego_pose.json",
    "category.json",
    "attribute.json",
    "visibility.json",
];

fn write_table<T: Serialize>(dir: &Path, file: &str, rows: &[T]) -> Result<()> {
    let path = dir.join(file);
    let mut f = std::fs::File::create(&path).map_err(Error::io_at(&path))?;
    let body = serde_json::to_string_pretty(rows)
        .map_err(|e| Error::Format(format!("serializing {file}: {e}")))?;
    f.write_all(body.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

fn read_table<T: for<'de> Deserialize<'de>>(dir: &Path, file: &str) -> Result<Vec<T>> {
    let path = dir.join(file);
    let body = std::fs::read_to_string(&path).map_err(Error::io_at(&path))?;
    serde_json::from_str(&body).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

impl RecordSet {
    /// Sort every table by token. Emission order is part of the on-disk
    /// determinism contract.
    pub fn sort(&mut self) {
        self.scenes.sort_by(|a, b| a.token.cmp(&b.token));
        self.samples.sort_by(|a, b| a.token.cmp(&b.token));
        self.sample_datas.sort_by(|a, b| a.token.cmp(&b.token));
        self.annotations.sort_by(|a, b| a.token.cmp(&b.token));
        self.calibrated_sensors
            .sort_by(|a, b| a.token.cmp(&b.token));
        self.ego_poses.sort_by(|a, b| a.token.cmp(&b.token));
        self.categories.sort_by(|a, b| a.token.cmp(&b.token));
        self.attributes.sort_by(|a, b| a.token.cmp(&b.token));
        self.visibility.sort_by(|a, b| a.token.cmp(&b.token));
    }

    /// Validate referential integrity: every token reference resolves and
    /// tokens are unique within their table.
    pub fn validate_integrity(&self) -> Result<()> {
        fn unique<'a>(
            table: &str,
            tokens: impl Iterator<Item = &'a String>,
        ) -> Result<BTreeSet<&'a str>> {
            let mut set = BTreeSet::new();
            for t in tokens {
                if !set.insert(t.as_str()) {
                    return Err(Error::DanglingToken {
                        table: format!("{table} (duplicate)"),
                        token: t.clone(),
                    });
                }
            }
            Ok(set)
        }
        let scenes = unique("scene", self.scenes.iter().map(|r| &r.token))?;
        let samples = unique("sample", self.samples.iter().map(|r| &r.token))?;
        let sample_datas = unique("sample_data", self.sample_datas.iter().map(|r| &r.token))?;
        let annotations = unique(
            "sample_annotation",
            self.annotations.iter().map(|r| &r.token),
        )?;
        let sensors = unique(
            "calibrated_sensor",
            self.calibrated_sensors.iter().map(|r| &r.token),
        )?;
        let ego_poses = unique("ego_pose", self.ego_poses.iter().map(|r| &r.token))?;
        let categories = unique("category", self.categories.iter().map(|r| &r.token))?;
        let attributes = unique("attribute", self.attributes.iter().map(|r| &r.token))?;
        let visibility = unique("visibility", self.visibility.iter().map(|r| &r.token))?;

        let check = |table: &str, tok: &str, set: &BTreeSet<&str>| -> Result<()> {
            if tok.is_empty() || set.contains(tok) {
                Ok(())
            } else {
                Err(Error::DanglingToken {
                    table: table.to_string(),
                    token: tok.to_string(),
                })
            }
        };

        for s in &self.scenes {
            if s.first_sample_token.is_empty() || s.last_sample_token.is_empty() {
                return Err(Error::DanglingToken {
                    table: "scene".into(),
                    token: s.token.clone(),
                });
            }
            check("scene", &s.first_sample_token, &samples)?;
            check("scene", &s.last_sample_token, &samples)?;
        }
        for s in &self.samples {
            if s.scene_token.is_empty() {
                return Err(Error::DanglingToken {
                    table: "sample".into(),
                    token: s.token.clone(),
                });
            }
            check("sample", &s.scene_token, &scenes)?;
            check("sample", &s.prev, &samples)?;
            check("sample", &s.next, &samples)?;
        }
        for d in &self.sample_datas {
            check("sample_data", &d.sample_token, &samples)?;
            check("sample_data", &d.ego_pose_token, &ego_poses)?;
            check("sample_data", &d.calibrated_sensor_token, &sensors)?;
            check("sample_data", &d.prev, &sample_datas)?;
            check("sample_data", &d.next, &sample_datas)?;
        }
        for a in &self.annotations {
            check("sample_annotation", &a.sample_token, &samples)?;
            check("sample_annotation", &a.category_token, &categories)?;
            check("sample_annotation", &a.visibility_token, &visibility)?;
            for t in &a.attribute_tokens {
                check("sample_annotation", t, &attributes)?;
            }
            check("sample_annotation", &a.prev, &annotations)?;
            check("sample_annotation", &a.next, &annotations)?;
        }
        Ok(())
    }

    /// Write the nine tables into `dir`, validating integrity first.
    /// Output is byte-deterministic for identical content.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        self.validate_integrity()?;
        let mut sorted = self.clone();
        sorted.sort();
        std::fs::create_dir_all(dir)?;
        write_table(dir, TABLE_FILES[0], &sorted.scenes)?;
        write_table(dir, TABLE_FILES[1], &sorted.samples)?;
        write_table(dir, TABLE_FILES[2], &sorted.sample_datas)?;
        write_table(dir, TABLE_FILES[3], &sorted.annotations)?;
        write_table(dir, TABLE_FILES[4], &sorted.calibrated_sensors)?;
        write_table(dir, TABLE_FILES[5], &sorted.ego_poses)?;
        write_table(dir, TABLE_FILES[6], &sorted.categories)?;
        write_table(dir, TABLE_FILES[7], &sorted.attributes)?;
        write_table(dir, TABLE_FILES[8], &sorted.visibility)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<RecordSet> {
        Ok(RecordSet {
            scenes: read_table(dir, TABLE_FILES[0])?,
            samples: read_table(dir, TABLE_FILES[1])?,
            sample_datas: read_table(dir, TABLE_FILES[2])?,
            annotations: read_table(dir, TABLE_FILES[3])?,
            calibrated_sensors: read_table(dir, TABLE_FILES[4])?,
            ego_poses: read_table(dir, TABLE_FILES[5])?,
            categories: read_table(dir, TABLE_FILES[6])?,
            attributes: read_table(dir, TABLE_FILES[7])?,
            visibility: read_table(dir, TABLE_FILES[8])?,
        })
    }

    pub fn category_name(&self, category_token: &str) -> Option<&str> {
        self.categories
            .iter()
            .find(|c| c.token == category_token)
            .map(|c| c.name.as_str())
    }

    /// Evaluation-side ground truth: every annotation as an ego-frame
    /// box keyed by its sample token.
    pub fn ground_truth(&self) -> Vec<crate::eval::SampleRecord> {
        self.annotations
            .iter()
            .map(|a| crate::eval::SampleRecord {
                sample_token: a.sample_token.clone(),
                bbox: crate::boxes::Box3D {
                    center: nalgebra::Vector3::new(
                        a.translation[0],
                        a.translation[1],
                        a.translation[2],
                    ),
                    frame: crate::boxes::BoxFrame::Ego,
                    size: a.size,
                    orientation: crate::geometry::Quaternion::new(
                        a.rotation[0],
                        a.rotation[1],
                        a.rotation[2],
                        a.rotation[3],
                    ),
                    category: self
                        .category_name(&a.category_token)
                        .unwrap_or("unknown")
                        .to_string(),
                    velocity: a.velocity,
                    visibility: 1.0,
                },
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_are_stable_32_hex() {
        let t = token(&["sample", "seq00", "42"]);
        assert_eq!(t.len(), 32);
        assert!(t.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(t, token(&["sample", "seq00", "42"]));
        assert_ne!(t, token(&["sample", "seq00", "43"]));
        // Separator keeps adjacent parts from colliding.
        assert_ne!(token(&["ab", "c"]), token(&["a", "bc"]));
    }

    #[test]
    fn integrity_catches_dangling_reference() {
        let mut rs = RecordSet::default();
        rs.scenes.push(SceneRow {
            token: "s1".into(),
            name: "x".into(),
            description: String::new(),
            nbr_samples: 1,
            first_sample_token: "missing".into(),
            last_sample_token: "missing".into(),
        });
        let err = rs.validate_integrity().unwrap_err();
        match err {
            Error::DanglingToken { table, token } => {
                assert_eq!(table, "scene");
                assert_eq!(token, "missing");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_recordset_is_valid_and_round_trips() {
        let rs = RecordSet::default();
        rs.validate_integrity().unwrap();
        let dir = tempfile::tempdir().unwrap();
        rs.write_dir(dir.path()).unwrap();
        for f in TABLE_FILES {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        let back = RecordSet::read_dir(dir.path()).unwrap();
        assert_eq!(back, rs);
    }

    #[test]
    fn visibility_bucketing() {
        assert_eq!(visibility_token_for(0.0), token(&["visibility", "v0-40"]));
        assert_eq!(visibility_token_for(0.5), token(&["visibility", "v40-60"]));
        assert_eq!(visibility_token_for(1.0), token(&["visibility", "v80-100"]));
    }
}
