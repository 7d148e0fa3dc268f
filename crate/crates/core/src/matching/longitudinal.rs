use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::PairingResult;
use crate::error::{Error, Result};
use crate::model::{GtNodule, Label, ScanRecord};

/// One nodule seen at the prior (T−2) and the latest (T−1) timepoint.
/// Suffix `2` is the prior scan, suffix `1` the latest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedPair {
    pub longitudinal_id: String,
    pub patient_id: String,
    pub label: Label,
    pub nodule_id_2: String,
    pub nodule_id_1: String,
    pub volume_2: Option<f64>,
    pub volume_1: Option<f64>,
    pub day_2: i64,
    pub day_1: i64,
    pub diameter_2: Option<f64>,
    pub diameter_1: Option<f64>,
    /// Highest assigned detection score, 0 when undetected.
    pub prediction_2: f64,
    pub prediction_1: f64,
}

impl LinkedPair {
    pub fn elapsed_days(&self) -> i64 {
        self.day_1 - self.day_2
    }
}

/// Link nodules sharing a `longitudinal_id` across the T−2 and T−1 scans.
///
/// Timepoints come from the scan records; the two pairings are merged, so
/// their order does not matter. Ids seen at only one timepoint are skipped.
/// Output is sorted by `longitudinal_id`.
pub fn link_longitudinal(
    gt: &[GtNodule],
    scans: &[ScanRecord],
    pairing_a: &PairingResult,
    pairing_b: &PairingResult,
) -> Vec<LinkedPair> {
    let scan_of: HashMap<&str, &ScanRecord> = scans.iter().map(|s| (s.scan_id.as_str(), s)).collect();
    let mut best = pairing_a.best_score_per_target();
    for (k, v) in pairing_b.best_score_per_target() {
        let e = best.entry(k).or_insert(v);
        *e = e.max(v);
    }

    // longitudinal id -> (T-2 nodule, T-1 nodule)
    let mut slots: BTreeMap<&str, [Option<(&GtNodule, &ScanRecord)>; 2]> = BTreeMap::new();
    for g in gt {
        let (Some(lid), Some(scan)) = (g.longitudinal_id.as_deref(), scan_of.get(g.scan_id.as_str())) else {
            continue;
        };
        let slot = match scan.timepoint {
            -2 => 0,
            -1 => 1,
            _ => continue,
        };
        slots.entry(lid).or_default()[slot] = Some((g, scan));
    }

    slots
        .into_iter()
        .filter_map(|(lid, slot)| {
            let [Some((g2, s2)), Some((g1, s1))] = slot else {
                return None;
            };
            Some(LinkedPair {
                longitudinal_id: lid.into(),
                patient_id: s1.patient_id.clone(),
                label: g1.label,
                nodule_id_2: g2.nodule_id.clone(),
                nodule_id_1: g1.nodule_id.clone(),
                volume_2: g2.volume,
                volume_1: g1.volume,
                day_2: s2.acquisition_day,
                day_1: s1.acquisition_day,
                diameter_2: g2.diameter,
                diameter_1: g1.diameter,
                prediction_2: best.get(g2.nodule_id.as_str()).copied().unwrap_or(0.0),
                prediction_1: best.get(g1.nodule_id.as_str()).copied().unwrap_or(0.0),
            })
        })
        .collect()
}

/// The pair with the largest prior volume; ties go to the larger latest
/// volume, then to the lexicographically smaller T−2 nodule id.
pub fn largest_nodule_at_first_tp(pairs: &[LinkedPair]) -> Result<&LinkedPair> {
    let vol = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);
    pairs
        .iter()
        .min_by(|a, b| {
            vol(b.volume_2)
                .total_cmp(&vol(a.volume_2))
                .then(vol(b.volume_1).total_cmp(&vol(a.volume_1)))
                .then(a.nodule_id_2.cmp(&b.nodule_id_2))
        })
        .ok_or(Error::Empty("no linked pair"))
}

/// [`largest_nodule_at_first_tp`] for every patient, sorted by patient id.
pub fn largest_per_patient(pairs: &[LinkedPair]) -> Vec<LinkedPair> {
    let mut by_patient: BTreeMap<&str, Vec<LinkedPair>> = BTreeMap::new();
    for p in pairs {
        by_patient.entry(p.patient_id.as_str()).or_default().push(p.clone());
    }
    by_patient
        .values()
        .map(|ps| largest_nodule_at_first_tp(ps).expect("groups are non-empty").clone())
        .collect()
}
