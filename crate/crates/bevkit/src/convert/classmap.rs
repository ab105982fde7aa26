//! Source-label to category mapping.
//!
//! Seven categories are shared with the nuScenes detection taxonomy;
//! everything else is preserved as an extension category. Unknown labels
//! are explicit errors, never silent drops.

use crate::error::{Error, Result};

/// The ten evaluation classes, in benchmark order.
pub const EVAL_CLASSES: [&str; 10] = [
    "car",
    "truck",
    "trailer",
    "bus",
    "bicycle",
    "motorcycle",
    "pedestrian",
    "pole",
    "object",
    "traffic_sign",
];

/// `(source label, target category, extension)` rows. Source labels
/// follow the CityScapes/KITTI-360 vocabulary.
const TABLE: &[(&str, &str, bool)] = &[
    ("car", "car", false),
    ("truck", "truck", false),
    ("bus", "bus", false),
    ("trailer", "trailer", false),
    ("caravan", "trailer", false),
    ("bicycle", "bicycle", false),
    ("motorcycle", "motorcycle", false),
    ("person", "pedestrian", false),
    ("pedestrian", "pedestrian", false),
    ("rider", "pedestrian", false),
    ("pole", "pole", true),
    ("smallpole", "pole", true),
    ("polegroup", "pole", true),
    ("lamp", "pole", true),
    ("trafficSign", "traffic_sign", true),
    ("traffic sign", "traffic_sign", true),
    ("stop", "traffic_sign", true),
    ("trafficLight", "object", true),
    ("traffic light", "object", true),
    ("unknownObject", "object", true),
    ("unknown object", "object", true),
    ("unknownVehicle", "object", true),
    ("train", "object", true),
    ("box", "object", true),
    ("trashbin", "object", true),
    ("trash bin", "object", true),
    ("vendingmachine", "object", true),
    ("vending machine", "object", true),
    ("building", "building", true),
    ("garage", "building", true),
];

/// Map a source label to `(category, extension)`.
pub fn map_classes(source_label: &str) -> Result<(&'static str, bool)> {
    TABLE
        .iter()
        .find(|(src, _, _)| *src == source_label)
        .map(|&(_, target, ext)| (target, ext))
        .ok_or_else(|| Error::UnmappedLabel(source_label.to_string()))
}

/// All distinct target categories with their extension flag, sorted by
/// name. This is the category table every record set carries.
pub fn all_categories() -> Vec<(&'static str, bool)> {
    let mut cats: Vec<(&'static str, bool)> = Vec::new();
    for &(_, target, ext) in TABLE {
        if !cats.iter().any(|(c, _)| *c == target) {
            cats.push((target, ext));
        }
    }
    cats.sort_by_key(|(c, _)| *c);
    cats
}
