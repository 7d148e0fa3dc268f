//! Free-response ROC over a pairing: sensitivity per target against mean
//! unmatched detections per scan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::PairingResult;

/// FP/scan thresholds averaged by the competition performance metric.
pub const CPM_FP_THRESHOLDS: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrocPoint {
    pub mean_fp_per_scan: f64,
    pub sensitivity: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrocCurve {
    /// Starts at the origin with an infinite cutoff; one point per unique
    /// detection score, in decreasing cutoff order.
    pub points: Vec<FrocPoint>,
    pub n_scans: usize,
    pub n_targets: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    /// A target's best assigned detection: the target counts as found from
    /// this score down.
    Hit,
    FalsePositive,
}

/// Pairing reduced to score events grouped by scan, sorted once, so FROC
/// summaries under scan weights (bootstrap multiplicities) cost one pass.
#[derive(Debug, Clone)]
pub struct FrocData {
    /// (score, scan index, event), descending score.
    events: Vec<(f64, usize, Event)>,
    targets_per_scan: Vec<u64>,
}

impl FrocData {
    pub fn new(pairing: &PairingResult) -> Self {
        let scan_ids: Vec<&String> = pairing.per_scan_counts.keys().collect();
        let index = |s: &str| {
            scan_ids
                .binary_search_by(|k| k.as_str().cmp(s))
                .expect("scan registered in pairing")
        };
        let targets_per_scan = pairing
            .per_scan_counts
            .values()
            .map(|t| t.n_gt_targets as u64)
            .collect();
        let mut best: Vec<(&str, &str, f64)> = Vec::new();
        {
            let mut seen = std::collections::HashMap::new();
            for a in &pairing.assignments {
                let e = seen
                    .entry(a.nodule_id.as_str())
                    .or_insert((a.scan_id.as_str(), a.score));
                e.1 = e.1.max(a.score);
            }
            for (nid, (sid, s)) in seen {
                best.push((nid, sid, s));
            }
        }
        let mut events: Vec<(f64, usize, Event)> =
            best.iter().map(|&(_, sid, s)| (s, index(sid), Event::Hit)).collect();
        events.extend(
            pairing
                .unmatched_detections
                .iter()
                .map(|u| (u.score, index(&u.scan_id), Event::FalsePositive)),
        );
        events.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        FrocData {
            events,
            targets_per_scan,
        }
    }

    pub fn n_scans(&self) -> usize {
        self.targets_per_scan.len()
    }

    /// Curve with scan `i` counted `weights[i]` times; `None` when the
    /// weighted target count is zero.
    pub fn weighted_curve(&self, weights: &[u32]) -> Option<FrocCurve> {
        let n_scans: u64 = weights.iter().map(|&w| w as u64).sum();
        let n_targets: u64 = self
            .targets_per_scan
            .iter()
            .zip(weights)
            .map(|(t, &w)| t * w as u64)
            .sum();
        if n_targets == 0 || n_scans == 0 {
            return None;
        }
        let mut points = vec![FrocPoint {
            mean_fp_per_scan: 0.0,
            sensitivity: 0.0,
            cutoff: f64::INFINITY,
        }];
        let (mut hits, mut fps) = (0u64, 0u64);
        let mut k = 0;
        while k < self.events.len() {
            let s = self.events[k].0;
            while k < self.events.len() && self.events[k].0 == s {
                let (_, scan, ev) = self.events[k];
                match ev {
                    Event::Hit => hits += weights[scan] as u64,
                    Event::FalsePositive => fps += weights[scan] as u64,
                }
                k += 1;
            }
            points.push(FrocPoint {
                mean_fp_per_scan: fps as f64 / n_scans as f64,
                sensitivity: hits as f64 / n_targets as f64,
                cutoff: s,
            });
        }
        Some(FrocCurve {
            points,
            n_scans: n_scans as usize,
            n_targets: n_targets as usize,
        })
    }

    pub fn curve(&self) -> Option<FrocCurve> {
        self.weighted_curve(&vec![1; self.n_scans()])
    }
}

/// FROC curve of a pairing. Every scan registered in the pairing counts in
/// the FP/scan denominator, including scans without detections.
pub fn froc(pairing: &PairingResult) -> Result<FrocCurve> {
    if pairing.targets.is_empty() {
        return Err(Error::Empty("no target nodule to score"));
    }
    Ok(FrocData::new(pairing).curve().expect("targets present"))
}

/// Best sensitivity at each distinct FP/scan value, increasing FP.
pub fn envelope(curve: &FrocCurve) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| (p.mean_fp_per_scan, p.sensitivity))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup_by(|b, a| a.0 == b.0);
    pts
}

/// Operating point whose FP/scan is nearest to `target_fp` (ties to the
/// lower FP), with the best sensitivity reached at that FP. Returns
/// `(sensitivity, achieved_fp)`.
pub fn sensitivity_at_fp(curve: &FrocCurve, target_fp: f64) -> Result<(f64, f64)> {
    let env = envelope(curve);
    let mut best: Option<(f64, f64)> = None;
    for &(fp, sens) in &env {
        let better = best.is_none_or(|(bfp, _)| (fp - target_fp).abs() < (bfp - target_fp).abs());
        if better {
            best = Some((fp, sens));
        }
    }
    best.map(|(fp, s)| (s, fp))
        .ok_or(Error::Empty("FROC curve has no point"))
}

/// Sensitivity at `fp`, linear between envelope points, clamped at the
/// curve ends.
pub fn interpolate_sensitivity(env: &[(f64, f64)], fp: f64) -> f64 {
    let first = env[0];
    let last = env[env.len() - 1];
    if fp <= first.0 {
        return first.1;
    }
    if fp >= last.0 {
        return last.1;
    }
    let k = env.partition_point(|p| p.0 <= fp);
    let (a, b) = (env[k - 1], env[k]);
    a.1 + (b.1 - a.1) * (fp - a.0) / (b.0 - a.0)
}

/// Competition performance metric: mean interpolated sensitivity at
/// [`CPM_FP_THRESHOLDS`].
pub fn cpm(curve: &FrocCurve) -> Result<f64> {
    if curve.points.is_empty() {
        return Err(Error::Empty("FROC curve has no point"));
    }
    let env = envelope(curve);
    let sum: f64 = CPM_FP_THRESHOLDS
        .iter()
        .map(|&t| interpolate_sensitivity(&env, t))
        .sum();
    Ok(sum / CPM_FP_THRESHOLDS.len() as f64)
}
