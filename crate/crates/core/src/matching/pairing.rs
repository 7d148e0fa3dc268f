use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{iou, mask_iou};
use crate::io::{MaskContainer, MaskStore};
use crate::model::{Detection, GtNodule, Label};

/// Default IoU threshold: a detection matches when IoU is strictly above it.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub detection_id: String,
    pub nodule_id: String,
    pub scan_id: String,
    pub iou: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedDetection {
    pub detection_id: String,
    pub scan_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanTally {
    pub n_gt_targets: usize,
    pub n_detections: usize,
}

/// A detection that clears the threshold for more than one target; it is
/// assigned to `assigned_to` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub detection_id: String,
    pub assigned_to: String,
    pub also_above_threshold: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub threshold: f64,
    /// In detection input order.
    pub assignments: Vec<Assignment>,
    pub unmatched_detections: Vec<UnmatchedDetection>,
    /// Target nodules without any assigned detection, in GT input order.
    pub undetected_gt: Vec<String>,
    /// Every target nodule id, in GT input order.
    pub targets: Vec<String>,
    pub per_scan_counts: BTreeMap<String, ScanTally>,
    pub ambiguous: Vec<Ambiguity>,
}

impl PairingResult {
    /// Register scans that carry neither targets nor detections so they
    /// count in per-scan averages.
    pub fn with_scans<'a>(mut self, scan_ids: impl IntoIterator<Item = &'a str>) -> Self {
        for s in scan_ids {
            self.per_scan_counts.entry(s.to_string()).or_default();
        }
        self
    }

    pub fn n_scans(&self) -> usize {
        self.per_scan_counts.len()
    }

    pub fn n_detected(&self) -> usize {
        self.targets.len() - self.undetected_gt.len()
    }

    /// Highest assigned detection score per target nodule.
    pub fn best_score_per_target(&self) -> HashMap<&str, f64> {
        let mut out: HashMap<&str, f64> = HashMap::new();
        for a in &self.assignments {
            let e = out.entry(a.nodule_id.as_str()).or_insert(a.score);
            *e = e.max(a.score);
        }
        out
    }
}

/// Greedy best-overlap pairing, one scan at a time. `overlap(gt_index,
/// det_index)` is the IoU used for matching.
fn pair_with(
    gt: &[GtNodule],
    detections: &[Detection],
    threshold: f64,
    target_labels: &[Label],
    mut overlap: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<PairingResult> {
    let is_target = |g: &GtNodule| target_labels.contains(&g.label);
    let mut by_scan: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut result = PairingResult {
        threshold,
        ..Default::default()
    };
    for (i, g) in gt.iter().enumerate() {
        let tally = result.per_scan_counts.entry(g.scan_id.clone()).or_default();
        if is_target(g) {
            by_scan.entry(g.scan_id.as_str()).or_default().push(i);
            tally.n_gt_targets += 1;
            result.targets.push(g.nodule_id.clone());
        }
    }

    let mut detected = HashSet::new();
    for (j, d) in detections.iter().enumerate() {
        result
            .per_scan_counts
            .entry(d.scan_id.clone())
            .or_default()
            .n_detections += 1;
        let mut above: Vec<(f64, &str)> = Vec::new();
        for &i in by_scan.get(d.scan_id.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
            let v = overlap(i, j)?;
            if v > threshold {
                above.push((v, gt[i].nodule_id.as_str()));
            }
        }
        // highest IoU, then lower nodule id
        above.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        match above.first() {
            Some(&(v, nid)) => {
                detected.insert(nid.to_string());
                if above.len() > 1 {
                    result.ambiguous.push(Ambiguity {
                        detection_id: d.detection_id.clone(),
                        assigned_to: nid.into(),
                        also_above_threshold: above[1..].iter().map(|a| a.1.to_string()).collect(),
                    });
                }
                result.assignments.push(Assignment {
                    detection_id: d.detection_id.clone(),
                    nodule_id: nid.into(),
                    scan_id: d.scan_id.clone(),
                    iou: v,
                    score: d.score,
                });
            }
            None => result.unmatched_detections.push(UnmatchedDetection {
                detection_id: d.detection_id.clone(),
                scan_id: d.scan_id.clone(),
                score: d.score,
            }),
        }
    }
    result.undetected_gt = result
        .targets
        .iter()
        .filter(|t| !detected.contains(*t))
        .cloned()
        .collect();
    Ok(result)
}

/// Pair detections to target GT nodules by bounding-box IoU.
///
/// Each detection goes to the target of highest IoU above `threshold`
/// (ties to the lower nodule id). Several detections may land on the same
/// target; none of them is a false positive. Detections that only overlap
/// non-target nodules stay unmatched.
pub fn pair(gt: &[GtNodule], detections: &[Detection], threshold: f64, target_labels: &[Label]) -> PairingResult {
    pair_with(gt, detections, threshold, target_labels, |i, j| {
        Ok(iou(&gt[i].bbox, &detections[j].bbox))
    })
    .expect("box overlap cannot fail")
}

/// As [`pair`], with voxel-mask IoU. Every compared record needs a
/// `mask_ref` resolvable in `masks`; masks are placed in scan coordinates
/// through their origin.
pub fn pair_by_mask(
    gt: &[GtNodule],
    detections: &[Detection],
    masks: &MaskStore,
    threshold: f64,
    target_labels: &[Label],
) -> Result<PairingResult> {
    fn load(masks: &MaskStore, r: &Option<String>, id: &str) -> Result<MaskContainer> {
        let r = r
            .as_deref()
            .ok_or_else(|| crate::Error::invalid(format!("`{id}` has no mask_ref; mask pairing needs one")))?;
        masks.load(r)
    }
    let mut gt_cache: HashMap<usize, MaskContainer> = HashMap::new();
    let mut det_cache: Option<(usize, MaskContainer)> = None;
    pair_with(gt, detections, threshold, target_labels, |i, j| {
        if let std::collections::hash_map::Entry::Vacant(e) = gt_cache.entry(i) {
            e.insert(load(masks, &gt[i].mask_ref, &gt[i].nodule_id)?);
        }
        if det_cache.as_ref().map(|c| c.0) != Some(j) {
            det_cache = Some((j, load(masks, &detections[j].mask_ref, &detections[j].detection_id)?));
        }
        Ok(mask_iou(&gt_cache[&i], &det_cache.as_ref().unwrap().1))
    })
}
