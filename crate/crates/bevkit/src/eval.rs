//! Detection metrics: class-wise AP with center-distance matching, true
//! positive errors, the rebalanced NDS without attribute error, and
//! distance/angular stratification.
//!
//! Conventions follow the nuScenes benchmark: greedy matching of
//! detections in descending score order against the nearest unmatched
//! ground truth of the same class within a planar center-distance
//! threshold; AP as the normalized area under the 101-point interpolated
//! precision-recall curve with the sub-10% recall and precision regions
//! clipped; TP errors averaged over the matches at the 2 m threshold.
//! Attribute error is never computed, and NDS redistributes its weight:
//!
//! ```text
//! NDS = (5 mAP + Σ_{e in {ATE, ASE, AOE, AVE}} (1 - min(1, e))) / 9
//! ```

use crate::boxes::Box3D;
use crate::error::{Error, Result};
use crate::geometry::wrap_to_pi;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Center-distance match thresholds in meters.
pub const CENTER_DIST_THRESHOLDS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Matches at this threshold feed the TP error metrics.
pub const TP_DIST_THRESHOLD: f64 = 2.0;

/// Worst-case value a TP metric takes when a class has no matches.
pub const TP_WORST: f64 = 1.0;

/// One detection, keyed by the sample it belongs to. Boxes are ego-frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub sample_token: String,
    pub bbox: Box3D,
    /// Confidence in `[0, 1]`.
    pub score: f64,
}

/// One ground-truth box, keyed by its sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_token: String,
    pub bbox: Box3D,
}

fn center_dist_2d(a: &Box3D, b: &Box3D) -> f64 {
    (a.center.x - b.center.x).hypot(a.center.y - b.center.y)
}

/// A matched (detection, ground truth) pair, by index into the caller's
/// slices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub det: usize,
    pub gt: usize,
    pub center_dist: f64,
}

/// Per-class matching output: AP per threshold plus the matches at
/// [`TP_DIST_THRESHOLD`].
#[derive(Debug, Clone)]
pub struct ClassApResult {
    pub class: String,
    pub n_gt: usize,
    /// Parallel to the thresholds passed in.
    pub ap: Vec<f64>,
    pub tp_matches: Vec<MatchedPair>,
}

/// `np.interp`-style piecewise-linear interpolation with `right = 0`:
/// queries left of the data take the first value, queries right of it
/// take zero, exact hits on duplicated abscissae take the rightmost.
fn interp_right_zero(xp: &[f64], fp: &[f64], x: f64) -> f64 {
    if xp.is_empty() {
        return 0.0;
    }
    if x < xp[0] {
        return fp[0];
    }
    if x > *xp.last().unwrap() {
        return 0.0;
    }
    let j = xp.partition_point(|&v| v <= x) - 1;
    if xp[j] == x || j + 1 >= xp.len() {
        return fp[j];
    }
    let (x0, x1) = (xp[j], xp[j + 1]);
    fp[j] + (fp[j + 1] - fp[j]) * (x - x0) / (x1 - x0)
}

/// Normalized area under the 101-point interpolated PR curve, with
/// recall and precision below 10% clipped out.
fn calc_ap(recall: &[f64], precision: &[f64]) -> f64 {
    if recall.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 11..=100 {
        let r = f64::from(i) / 100.0;
        sum += (interp_right_zero(recall, precision, r) - 0.1).max(0.0);
    }
    (sum / 90.0) / 0.9
}

/// Greedy center-distance matching and AP for one class.
///
/// Detections are ranked by descending score (stable; input order breaks
/// ties). Each detection matches the nearest unmatched ground truth of
/// its class within the same sample when that distance is below the
/// threshold.
pub fn match_and_ap(
    dets: &[DetectionRecord],
    gts: &[SampleRecord],
    class: &str,
    thresholds: &[f64],
) -> ClassApResult {
    let mut det_order: Vec<usize> = (0..dets.len())
        .filter(|&i| dets[i].bbox.category == class)
        .collect();
    det_order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut gt_by_sample: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut n_gt = 0;
    for (i, g) in gts.iter().enumerate() {
        if g.bbox.category == class {
            gt_by_sample.entry(&g.sample_token).or_default().push(i);
            n_gt += 1;
        }
    }

    let mut ap = Vec::with_capacity(thresholds.len());
    let mut tp_matches = Vec::new();
    for &threshold in thresholds {
        let mut matched: HashMap<usize, bool> = HashMap::new();
        let mut matches = Vec::new();
        let mut tp_cum = Vec::with_capacity(det_order.len());
        let mut fp_cum = Vec::with_capacity(det_order.len());
        let (mut tp, mut fp) = (0usize, 0usize);
        for &di in &det_order {
            let det = &dets[di];
            let mut best: Option<(f64, usize)> = None;
            if let Some(cands) = gt_by_sample.get(det.sample_token.as_str()) {
                for &gi in cands {
                    if matched.get(&gi).copied().unwrap_or(false) {
                        continue;
                    }
                    let d = center_dist_2d(&det.bbox, &gts[gi].bbox);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, gi));
                    }
                }
            }
            match best {
                Some((dist, gi)) if dist < threshold => {
                    matched.insert(gi, true);
                    matches.push(MatchedPair {
                        det: di,
                        gt: gi,
                        center_dist: dist,
                    });
                    tp += 1;
                }
                _ => fp += 1,
            }
            tp_cum.push(tp);
            fp_cum.push(fp);
        }
        if threshold == TP_DIST_THRESHOLD {
            tp_matches = matches;
        }
        if n_gt == 0 || det_order.is_empty() {
            ap.push(0.0);
            continue;
        }
        let recall: Vec<f64> = tp_cum.iter().map(|&t| t as f64 / n_gt as f64).collect();
        let precision: Vec<f64> = tp_cum
            .iter()
            .zip(&fp_cum)
            .map(|(&t, &f)| t as f64 / (t + f) as f64)
            .collect();
        ap.push(calc_ap(&recall, &precision));
    }

    ClassApResult {
        class: class.to_string(),
        n_gt,
        ap,
        tp_matches,
    }
}

/// Mean true-positive errors over matched pairs, per nuScenes
/// definitions. Classes without matches take the worst-case value 1.0.
/// Velocity error skips pairs where either side lacks a velocity; a
/// matched class with no velocity data at all has an undefined AVE
/// (`None`) and drops out of the mAVE mean, the way the reference
/// protocol treats velocity-free classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpErrors {
    /// Planar center distance, meters.
    pub ate: f64,
    /// `1 - IoU` of the size-aligned boxes.
    pub ase: f64,
    /// Absolute yaw difference, radians.
    pub aoe: f64,
    /// Planar velocity L2 difference, m/s.
    pub ave: Option<f64>,
}

pub fn tp_errors(pairs: &[(&Box3D, &Box3D)]) -> TpErrors {
    if pairs.is_empty() {
        return TpErrors {
            ate: TP_WORST,
            ase: TP_WORST,
            aoe: TP_WORST,
            ave: Some(TP_WORST),
        };
    }
    let n = pairs.len() as f64;
    let ate = pairs.iter().map(|(d, g)| center_dist_2d(d, g)).sum::<f64>() / n;
    let ase = pairs
        .iter()
        .map(|(d, g)| {
            let inter: f64 = (0..3).map(|i| d.size[i].min(g.size[i])).product();
            let vol_d: f64 = d.size.iter().product();
            let vol_g: f64 = g.size.iter().product();
            1.0 - inter / (vol_d + vol_g - inter)
        })
        .sum::<f64>()
        / n;
    let aoe = pairs
        .iter()
        .map(|(d, g)| wrap_to_pi(d.yaw() - g.yaw()).abs())
        .sum::<f64>()
        / n;
    let vel_errs: Vec<f64> = pairs
        .iter()
        .filter_map(|(d, g)| match (d.velocity, g.velocity) {
            (Some(vd), Some(vg)) => Some((vd[0] - vg[0]).hypot(vd[1] - vg[1])),
            _ => None,
        })
        .collect();
    let ave = if vel_errs.is_empty() {
        None
    } else {
        Some(vel_errs.iter().sum::<f64>() / vel_errs.len() as f64)
    };
    TpErrors { ate, ase, aoe, ave }
}

/// The rebalanced detection score: mAP weighted 5, the four TP error
/// terms weighted 1 each, normalized by 9.
pub fn nds(mean_ap: f64, mate: f64, mase: f64, maoe: f64, mave: f64) -> f64 {
    let tp_term: f64 = [mate, mase, maoe, mave]
        .iter()
        .map(|&e| 1.0 - e.min(1.0))
        .sum();
    (5.0 * mean_ap + tp_term) / 9.0
}

/// Evaluation settings; defaults mirror the benchmark protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub classes: Vec<String>,
    pub thresholds: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            classes: crate::convert::EVAL_CLASSES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            thresholds: CENTER_DIST_THRESHOLDS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub n_gt: usize,
    /// AP per threshold, in threshold order.
    pub ap: Vec<f64>,
    pub errors: TpErrors,
}

/// Full metrics report. Classes without ground truth are listed but
/// excluded from every mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub mean_ap: f64,
    pub mate: f64,
    pub mase: f64,
    pub maoe: f64,
    pub mave: f64,
    pub nds: f64,
}

/// Run the full evaluation protocol.
pub fn evaluate(
    dets: &[DetectionRecord],
    gts: &[SampleRecord],
    config: &EvalConfig,
) -> Result<MetricsReport> {
    for d in dets {
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::Config(format!(
                "detection score {} outside [0, 1]",
                d.score
            )));
        }
    }
    let mut per_class = BTreeMap::new();
    let mut ap_values = Vec::new();
    let mut errs: Vec<TpErrors> = Vec::new();
    for class in &config.classes {
        let r = match_and_ap(dets, gts, class, &config.thresholds);
        let pairs: Vec<(&Box3D, &Box3D)> = r
            .tp_matches
            .iter()
            .map(|m| (&dets[m.det].bbox, &gts[m.gt].bbox))
            .collect();
        let errors = tp_errors(&pairs);
        if r.n_gt > 0 {
            ap_values.extend(r.ap.iter().copied());
            errs.push(errors);
        }
        per_class.insert(
            class.clone(),
            ClassMetrics {
                n_gt: r.n_gt,
                ap: r.ap,
                errors,
            },
        );
    }
    let mean_ap = if ap_values.is_empty() {
        0.0
    } else {
        ap_values.iter().sum::<f64>() / ap_values.len() as f64
    };
    let mean_of = |f: fn(&TpErrors) -> f64| -> f64 {
        if errs.is_empty() {
            TP_WORST
        } else {
            errs.iter().map(f).sum::<f64>() / errs.len() as f64
        }
    };
    let (mate, mase, maoe) = (mean_of(|e| e.ate), mean_of(|e| e.ase), mean_of(|e| e.aoe));
    // Classes with an undefined velocity error drop out of the mAVE mean.
    let aves: Vec<f64> = errs.iter().filter_map(|e| e.ave).collect();
    let mave = if aves.is_empty() {
        TP_WORST
    } else {
        aves.iter().sum::<f64>() / aves.len() as f64
    };
    Ok(MetricsReport {
        per_class,
        mean_ap,
        mate,
        mase,
        maoe,
        mave,
        nds: nds(mean_ap, mate, mase, maoe, mave),
    })
}

/// A named angular stratum: a union of `[start, end)` degree intervals
/// normalized to `[0, 360)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularStratum {
    pub name: String,
    pub intervals: Vec<(f64, f64)>,
}

/// Stratification axes: planar range rings or azimuth sectors, both in
/// the ego frame of each box.
#[derive(Debug, Clone, PartialEq)]
pub enum Strata {
    /// `[lo, hi)` meters.
    Distance(Vec<(f64, f64)>),
    Angular(Vec<AngularStratum>),
}

/// The benchmark's five range rings: 0-10 ... 40-50 m.
pub fn distance_bins_10m() -> Vec<(f64, f64)> {
    (0..5)
        .map(|i| (f64::from(i) * 10.0, f64::from(i + 1) * 10.0))
        .collect()
}

/// The benchmark's three 120-degree sectors, placed symmetrically about
/// the ego axes: front `[-60, 60)`, back `[120, 240)`, sides the rest.
pub fn angular_sectors_120deg() -> Vec<AngularStratum> {
    vec![
        AngularStratum {
            name: "front".into(),
            intervals: vec![(300.0, 360.0), (0.0, 60.0)],
        },
        AngularStratum {
            name: "back".into(),
            intervals: vec![(120.0, 240.0)],
        },
        AngularStratum {
            name: "sides".into(),
            intervals: vec![(60.0, 120.0), (240.0, 300.0)],
        },
    ]
}

fn check_disjoint_intervals(intervals: &[(String, (f64, f64))]) -> Result<()> {
    for (i, (na, a)) in intervals.iter().enumerate() {
        if a.1 <= a.0 {
            return Err(Error::OverlappingStrata(format!(
                "{na}: empty interval [{}, {})",
                a.0, a.1
            )));
        }
        for (nb, b) in intervals.iter().skip(i + 1) {
            if a.0.max(b.0) < a.1.min(b.1) {
                return Err(Error::OverlappingStrata(format!(
                    "{na} [{}, {}) intersects {nb} [{}, {})",
                    a.0, a.1, b.0, b.1
                )));
            }
        }
    }
    Ok(())
}

impl Strata {
    pub fn validate(&self) -> Result<()> {
        match self {
            Strata::Distance(bins) => {
                let named: Vec<(String, (f64, f64))> = bins
                    .iter()
                    .map(|&(lo, hi)| (format!("{lo}-{hi}m"), (lo, hi)))
                    .collect();
                check_disjoint_intervals(&named)
            }
            Strata::Angular(sectors) => {
                let mut named = Vec::new();
                for s in sectors {
                    for &(lo, hi) in &s.intervals {
                        if !(0.0..360.0).contains(&lo) || !(hi > 0.0 && hi <= 360.0) {
                            return Err(Error::OverlappingStrata(format!(
                                "{}: interval [{lo}, {hi}) outside [0, 360)",
                                s.name
                            )));
                        }
                        named.push((s.name.clone(), (lo, hi)));
                    }
                }
                check_disjoint_intervals(&named)
            }
        }
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            Strata::Distance(bins) => bins.iter().map(|(lo, hi)| format!("{lo}-{hi}m")).collect(),
            Strata::Angular(sectors) => sectors.iter().map(|s| s.name.clone()).collect(),
        }
    }

    /// Index of the stratum a box belongs to, by its own ego-frame
    /// position; `None` when no stratum covers it.
    pub fn stratum_of(&self, b: &Box3D) -> Option<usize> {
        match self {
            Strata::Distance(bins) => {
                let d = b.center.x.hypot(b.center.y);
                bins.iter().position(|&(lo, hi)| d >= lo && d < hi)
            }
            Strata::Angular(sectors) => {
                let az = crate::geometry::wrap_to_2pi(b.center.y.atan2(b.center.x)).to_degrees();
                sectors
                    .iter()
                    .position(|s| s.intervals.iter().any(|&(lo, hi)| az >= lo && az < hi))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumResult {
    pub name: String,
    pub n_gt: usize,
    pub n_det: usize,
    pub mean_ap: f64,
    /// Mean AP across thresholds, per class with ground truth here.
    pub per_class_ap: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub strata: Vec<StratumResult>,
    /// Boxes no stratum covers (possible when bins do not span the scene).
    pub uncovered_gt: usize,
    pub uncovered_det: usize,
}

/// Per-stratum mAP: ground truth and detections are each assigned by
/// their own position, then the full AP pipeline runs on the filtered
/// sets.
pub fn stratified_map(
    dets: &[DetectionRecord],
    gts: &[SampleRecord],
    strata: &Strata,
    config: &EvalConfig,
) -> Result<StratifiedReport> {
    strata.validate()?;
    let names = strata.names();
    let mut results = Vec::with_capacity(names.len());
    let mut uncovered_gt = 0;
    let mut uncovered_det = 0;
    let det_strata: Vec<Option<usize>> = dets.iter().map(|d| strata.stratum_of(&d.bbox)).collect();
    let gt_strata: Vec<Option<usize>> = gts.iter().map(|g| strata.stratum_of(&g.bbox)).collect();
    uncovered_det += det_strata.iter().filter(|s| s.is_none()).count();
    uncovered_gt += gt_strata.iter().filter(|s| s.is_none()).count();

    for (si, name) in names.iter().enumerate() {
        let sub_dets: Vec<DetectionRecord> = dets
            .iter()
            .zip(&det_strata)
            .filter(|(_, s)| **s == Some(si))
            .map(|(d, _)| d.clone())
            .collect();
        let sub_gts: Vec<SampleRecord> = gts
            .iter()
            .zip(&gt_strata)
            .filter(|(_, s)| **s == Some(si))
            .map(|(g, _)| g.clone())
            .collect();
        let mut per_class_ap = BTreeMap::new();
        let mut all_aps = Vec::new();
        for class in &config.classes {
            let r = match_and_ap(&sub_dets, &sub_gts, class, &config.thresholds);
            if r.n_gt > 0 {
                let class_mean = r.ap.iter().sum::<f64>() / r.ap.len() as f64;
                per_class_ap.insert(class.clone(), class_mean);
                all_aps.extend(r.ap);
            }
        }
        results.push(StratumResult {
            name: name.clone(),
            n_gt: sub_gts.len(),
            n_det: sub_dets.len(),
            mean_ap: if all_aps.is_empty() {
                0.0
            } else {
                all_aps.iter().sum::<f64>() / all_aps.len() as f64
            },
            per_class_ap,
        });
    }
    Ok(StratifiedReport {
        strata: results,
        uncovered_gt,
        uncovered_det,
    })
}

/// On-disk detection format: a JSON object mapping sample tokens to
/// detection arrays, nuScenes-submission style. Boxes are ego-frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFile {
    pub results: BTreeMap<String, Vec<DetectionJson>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionJson {
    pub translation: [f64; 3],
    /// `(w, l, h)` meters.
    pub size: [f64; 3],
    /// Unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
    pub velocity: Option<[f64; 2]>,
    pub detection_name: String,
    pub detection_score: f64,
}

pub fn detections_from_file(file: &DetectionFile) -> Vec<DetectionRecord> {
    let mut out = Vec::new();
    for (sample_token, dets) in &file.results {
        for d in dets {
            out.push(DetectionRecord {
                sample_token: sample_token.clone(),
                bbox: Box3D {
                    center: nalgebra::Vector3::new(
                        d.translation[0],
                        d.translation[1],
                        d.translation[2],
                    ),
                    frame: crate::boxes::BoxFrame::Ego,
                    size: d.size,
                    orientation: crate::geometry::Quaternion::new(
                        d.rotation[0],
                        d.rotation[1],
                        d.rotation[2],
                        d.rotation[3],
                    ),
                    category: d.detection_name.clone(),
                    velocity: d.velocity,
                    visibility: 1.0,
                },
                score: d.detection_score,
            });
        }
    }
    out
}

pub fn load_detections(path: &std::path::Path) -> Result<Vec<DetectionRecord>> {
    let body = std::fs::read_to_string(path).map_err(Error::io_at(path))?;
    let file: DetectionFile = serde_json::from_str(&body)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    Ok(detections_from_file(&file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::BoxFrame;
    use crate::geometry::Quaternion;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn make_box(x: f64, y: f64, class: &str) -> Box3D {
        Box3D {
            center: Vector3::new(x, y, 1.0),
            frame: BoxFrame::Ego,
            size: [2.0, 4.0, 1.5],
            orientation: Quaternion::identity(),
            category: class.into(),
            velocity: Some([1.0, 0.0]),
            visibility: 1.0,
        }
    }

    fn gt(token: &str, x: f64, y: f64, class: &str) -> SampleRecord {
        SampleRecord {
            sample_token: token.into(),
            bbox: make_box(x, y, class),
        }
    }

    fn det(token: &str, x: f64, y: f64, class: &str, score: f64) -> DetectionRecord {
        DetectionRecord {
            sample_token: token.into(),
            bbox: make_box(x, y, class),
            score,
        }
    }

    #[test]
    fn perfect_detections_score_one() {
        let gts = vec![gt("s1", 0.0, 0.0, "car"), gt("s1", 10.0, 0.0, "car")];
        let dets: Vec<DetectionRecord> = gts
            .iter()
            .map(|g| DetectionRecord {
                sample_token: g.sample_token.clone(),
                bbox: g.bbox.clone(),
                score: 1.0,
            })
            .collect();
        let r = match_and_ap(&dets, &gts, "car", &CENTER_DIST_THRESHOLDS);
        for ap in r.ap {
            assert_relative_eq!(ap, 1.0, epsilon = 1e-12);
        }
        let report = evaluate(&dets, &gts, &EvalConfig::default()).unwrap();
        assert_relative_eq!(report.mean_ap, 1.0, epsilon = 1e-12);
        assert_relative_eq!(report.nds, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_detections_score_zero() {
        let gts = vec![gt("s1", 0.0, 0.0, "car")];
        let r = match_and_ap(&[], &gts, "car", &CENTER_DIST_THRESHOLDS);
        assert!(r.ap.iter().all(|&a| a == 0.0));
        let report = evaluate(&[], &gts, &EvalConfig::default()).unwrap();
        assert_eq!(report.mean_ap, 0.0);
        assert_relative_eq!(report.nds, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn three_gts_two_dets_hand_worked() {
        // One det 0.3 m from a gt, one 3 m off. At thresholds below 4 m
        // the PR points are rec = [1/3, 1/3], prec = [1, 1/2]; at 4 m
        // rec = [1/3, 2/3], prec = [1, 1].
        let gts = vec![
            gt("s1", 0.0, 0.0, "car"),
            gt("s1", 10.0, 0.0, "car"),
            gt("s1", 20.0, 0.0, "car"),
        ];
        let dets = vec![
            det("s1", 0.3, 0.0, "car", 0.9),
            det("s1", 13.0, 0.0, "car", 0.8),
        ];
        let r = match_and_ap(&dets, &gts, "car", &CENTER_DIST_THRESHOLDS);
        // 101-point interpolation: 23 of the 90 kept recall points sit at
        // precision 1.0, the rest at 0 -> AP = 23/90.
        assert_relative_eq!(r.ap[0], 23.0 / 90.0, epsilon = 1e-12);
        assert_relative_eq!(r.ap[1], 23.0 / 90.0, epsilon = 1e-12);
        assert_relative_eq!(r.ap[2], 23.0 / 90.0, epsilon = 1e-12);
        // 4 m threshold: both detections match -> 56 points at 1.0.
        assert_relative_eq!(r.ap[3], 56.0 / 90.0, epsilon = 1e-12);
    }

    #[test]
    fn tp_error_isolated_cases() {
        let a = make_box(0.0, 0.0, "car");
        let perfect = tp_errors(&[(&a, &a)]);
        assert_eq!(
            (perfect.ate, perfect.ase, perfect.aoe, perfect.ave),
            (0.0, 0.0, 0.0, Some(0.0))
        );

        let shifted = make_box(1.0, 0.0, "car");
        let e = tp_errors(&[(&shifted, &a)]);
        assert_relative_eq!(e.ate, 1.0);
        assert_relative_eq!(e.ase, 0.0);
        assert_relative_eq!(e.aoe, 0.0);

        let mut rotated = make_box(0.0, 0.0, "car");
        rotated.orientation =
            Quaternion::from_axis_angle(Vector3::z(), std::f64::consts::FRAC_PI_2);
        let e = tp_errors(&[(&rotated, &a)]);
        assert_relative_eq!(e.aoe, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);

        let no_match = tp_errors(&[]);
        assert_eq!(
            (no_match.ate, no_match.ase, no_match.aoe, no_match.ave),
            (1.0, 1.0, 1.0, Some(1.0))
        );
    }

    #[test]
    fn ase_from_scaled_box() {
        let g = make_box(0.0, 0.0, "car"); // 2 x 4 x 1.5
        let mut d = g.clone();
        d.size = [1.0, 4.0, 1.5]; // half the width
        let e = tp_errors(&[(&d, &g)]);
        // IoU of aligned boxes: 6 / 12 = 0.5.
        assert_relative_eq!(e.ase, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn velocity_error_skips_missing() {
        let g = make_box(0.0, 0.0, "car"); // v = (1, 0)
        let mut d = g.clone();
        d.velocity = Some([3.0, 0.0]);
        let e = tp_errors(&[(&d, &g)]);
        assert_relative_eq!(e.ave.unwrap(), 2.0);

        // A matched class with no velocity data has an undefined AVE.
        let mut d2 = g.clone();
        d2.velocity = None;
        let e = tp_errors(&[(&d2, &g)]);
        assert_eq!(e.ave, None);
    }

    #[test]
    fn nds_reproduces_reported_rows() {
        // Baseline rows of the reference benchmark table.
        let v = nds(0.121, 0.736, 0.481, 1.031, 1.017);
        assert!((v - 0.159).abs() < 0.01, "got {v}");
        assert_relative_eq!(v, 0.154, epsilon = 5e-4);

        let v = nds(0.266, 0.668, 0.340, 0.885, 0.932);
        assert!((v - 0.280).abs() < 0.01, "got {v}");
        assert_relative_eq!(v, 0.278, epsilon = 5e-4);

        assert_eq!(nds(0.0, 1.0, 1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn stratified_assignment_and_conservation() {
        let strata = Strata::Distance(distance_bins_10m());
        let gts = vec![
            gt("s1", 15.0, 0.0, "car"), // 10-20 m
            gt("s1", 3.0, 4.0, "car"),  // 5 m -> 0-10
            gt("s1", 0.0, 45.0, "car"), // 40-50
        ];
        assert_eq!(strata.stratum_of(&gts[0].bbox), Some(1));
        assert_eq!(strata.stratum_of(&gts[1].bbox), Some(0));
        assert_eq!(strata.stratum_of(&gts[2].bbox), Some(4));

        let dets: Vec<DetectionRecord> = gts
            .iter()
            .map(|g| DetectionRecord {
                sample_token: g.sample_token.clone(),
                bbox: g.bbox.clone(),
                score: 0.9,
            })
            .collect();
        let report = stratified_map(&dets, &gts, &strata, &EvalConfig::default()).unwrap();
        let total: usize = report.strata.iter().map(|s| s.n_gt).sum();
        assert_eq!(total + report.uncovered_gt, gts.len());
        assert_eq!(report.uncovered_gt, 0);
        for s in &report.strata {
            if s.n_gt > 0 {
                assert_relative_eq!(s.mean_ap, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn angular_sector_conventions() {
        let strata = Strata::Angular(angular_sectors_120deg());
        strata.validate().unwrap();
        // Dead ahead -> front; behind -> back; left -> sides.
        assert_eq!(strata.stratum_of(&make_box(10.0, 0.0, "car")), Some(0));
        assert_eq!(strata.stratum_of(&make_box(-10.0, 0.0, "car")), Some(1));
        assert_eq!(strata.stratum_of(&make_box(0.0, 10.0, "car")), Some(2));
        // Half-open sectors: just below 60 degrees is front, just above
        // is sides.
        for (az_deg, want) in [(59.9, 0), (60.1, 2)] {
            let az = f64::to_radians(az_deg);
            let b = make_box(10.0 * az.cos(), 10.0 * az.sin(), "car");
            assert_eq!(strata.stratum_of(&b), Some(want), "azimuth {az_deg}");
        }
    }

    #[test]
    fn overlapping_strata_rejected() {
        let strata = Strata::Distance(vec![(0.0, 10.0), (5.0, 20.0)]);
        assert!(matches!(
            stratified_map(&[], &[], &strata, &EvalConfig::default()),
            Err(Error::OverlappingStrata(_))
        ));
    }

    #[test]
    fn score_scaling_leaves_ap_unchanged() {
        let gts = vec![
            gt("s1", 0.0, 0.0, "car"),
            gt("s1", 8.0, 0.0, "car"),
            gt("s2", 3.0, 1.0, "car"),
        ];
        let dets = vec![
            det("s1", 0.2, 0.0, "car", 0.9),
            det("s1", 8.4, 0.2, "car", 0.5),
            det("s2", 30.0, 0.0, "car", 0.7),
        ];
        let base = match_and_ap(&dets, &gts, "car", &CENTER_DIST_THRESHOLDS);
        let scaled: Vec<DetectionRecord> = dets
            .iter()
            .map(|d| DetectionRecord {
                score: d.score * 0.31,
                ..d.clone()
            })
            .collect();
        let got = match_and_ap(&scaled, &gts, "car", &CENTER_DIST_THRESHOLDS);
        assert_eq!(base.ap, got.ap);
    }

    #[test]
    fn adding_top_scored_tp_never_decreases_ap() {
        let gts = vec![
            gt("s1", 0.0, 0.0, "car"),
            gt("s1", 10.0, 0.0, "car"),
            gt("s1", 20.0, 0.0, "car"),
        ];
        let mut dets = vec![
            det("s1", 0.1, 0.0, "car", 0.6),
            det("s1", 14.0, 0.0, "car", 0.5),
        ];
        let before = match_and_ap(&dets, &gts, "car", &CENTER_DIST_THRESHOLDS);
        dets.push(det("s1", 20.1, 0.0, "car", 0.95));
        let after = match_and_ap(&dets, &gts, "car", &CENTER_DIST_THRESHOLDS);
        for (b, a) in before.ap.iter().zip(&after.ap) {
            assert!(a >= b, "AP decreased: {b} -> {a}");
        }
    }

    #[test]
    fn detection_file_round_trip() {
        let mut results = BTreeMap::new();
        results.insert(
            "tok1".to_string(),
            vec![DetectionJson {
                translation: [1.0, 2.0, 0.5],
                size: [2.0, 4.0, 1.5],
                rotation: [1.0, 0.0, 0.0, 0.0],
                velocity: None,
                detection_name: "car".into(),
                detection_score: 0.7,
            }],
        );
        let file = DetectionFile { results };
        let records = detections_from_file(&file);
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].sample_token, "tok1");
        assert_eq!(records[0].bbox.category, "car");
    }
}
