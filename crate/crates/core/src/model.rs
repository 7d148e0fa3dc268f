//! Cohort data model shared by every analysis module.
//!
//! Records are plain data: they are built by the ingestion layer (or by hand
//! in tests) and never mutated by the analyses. Unknown fields found in the
//! input files are kept in `attributes` so that subgroup axes can be defined
//! on them later.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::BoundingBox3D;

/// Free-form attributes preserved from the input records.
pub type Attributes = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malignant,
    Benign,
}

impl Label {
    pub fn is_malignant(self) -> bool {
        matches!(self, Label::Malignant)
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "malignant" => Ok(Label::Malignant),
            "benign" => Ok(Label::Benign),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub cancer_status: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub age: f64,
    #[serde(default)]
    pub sex: Sex,
    #[serde(default)]
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copd: Option<bool>,
    #[serde(flatten)]
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub scan_id: String,
    pub patient_id: String,
    /// -1 is the scan closest to diagnosis, -2 the prior one, and so on.
    pub timepoint: i32,
    /// Days on an arbitrary per-patient epoch; only differences matter.
    pub acquisition_day: i64,
    #[serde(default)]
    pub manufacturer: String,
    #[serde(default)]
    pub kernel: String,
    pub slice_thickness: f64,
    /// (z, y, x) voxel spacing in mm.
    pub spacing: [f64; 3],
    #[serde(flatten)]
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtNodule {
    pub nodule_id: String,
    pub scan_id: String,
    pub label: Label,
    pub bbox: BoundingBox3D,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_ref: Option<String>,
    #[serde(default, rename = "diameter_mm", skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
    #[serde(default, rename = "volume_mm3", skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longitudinal_id: Option<String>,
    #[serde(flatten)]
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub detection_id: String,
    pub scan_id: String,
    pub score: f64,
    pub bbox: BoundingBox3D,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_ref: Option<String>,
    #[serde(default, rename = "diameter_mm", skip_serializing_if = "Option::is_none")]
    pub derived_diameter: Option<f64>,
    #[serde(default, rename = "volume_mm3", skip_serializing_if = "Option::is_none")]
    pub derived_volume: Option<f64>,
    #[serde(flatten)]
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderFinding {
    pub bbox: BoundingBox3D,
    /// Integer malignancy score on the 1-10 scale.
    pub malignancy_score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderAnnotation {
    pub reader_id: String,
    pub scan_id: String,
    #[serde(default)]
    pub findings: Vec<ReaderFinding>,
    #[serde(flatten)]
    pub attributes: Attributes,
}

/// A fully materialized cohort. Masks are not held here; see
/// [`crate::io::MaskStore`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cohort {
    pub patients: Vec<PatientRecord>,
    pub scans: Vec<ScanRecord>,
    pub gt_nodules: Vec<GtNodule>,
    pub detections: Vec<Detection>,
    pub annotations: Vec<ReaderAnnotation>,
}

impl Cohort {
    pub fn patient(&self, id: &str) -> Option<&PatientRecord> {
        self.patients.iter().find(|p| p.patient_id == id)
    }

    /// scan_id -> scan record.
    pub fn scan_index(&self) -> HashMap<&str, &ScanRecord> {
        self.scans.iter().map(|s| (s.scan_id.as_str(), s)).collect()
    }

    /// Scans of the given timepoint, or all scans when `timepoint` is `None`.
    pub fn scan_ids_at(&self, timepoint: Option<i32>) -> BTreeSet<&str> {
        self.scans
            .iter()
            .filter(|s| timepoint.is_none_or(|t| s.timepoint == t))
            .map(|s| s.scan_id.as_str())
            .collect()
    }

    /// Patient-level (label, score) pairs: each patient scores the highest
    /// detection found on its scans at `timepoint` (all scans if `None`).
    /// Patients are returned in input order.
    pub fn patient_scores(&self, timepoint: Option<i32>) -> Vec<(String, bool, f64)> {
        let scans = self.scan_index();
        let mut by_patient: HashMap<&str, Vec<&Detection>> = HashMap::new();
        for det in &self.detections {
            let Some(scan) = scans.get(det.scan_id.as_str()) else {
                continue;
            };
            if timepoint.is_none_or(|t| scan.timepoint == t) {
                by_patient.entry(scan.patient_id.as_str()).or_default().push(det);
            }
        }
        self.patients
            .iter()
            .map(|p| {
                let dets = by_patient.get(p.patient_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                (
                    p.patient_id.clone(),
                    p.cancer_status,
                    patient_score(dets.iter().copied()),
                )
            })
            .collect()
    }
}

/// Patient-level malignancy score: the highest detection score, or 0 when
/// the patient has no detection at all.
pub fn patient_score<'a>(detections: impl IntoIterator<Item = &'a Detection>) -> f64 {
    detections.into_iter().map(|d| d.score).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DanglingKey,
    DuplicateKey,
    InvariantBreach,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// "<record type>:<key>" of the offending record.
    pub record: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, record: String, detail: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            record,
            detail: detail.into(),
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{:?} {}: {}", v.kind, v.record, v.detail)?;
        }
        Ok(())
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Checks keys and record invariants across the whole cohort. Violations are
/// reported in a fixed order: patients, scans, nodules, detections, readers.
pub fn validate_cohort(cohort: &Cohort) -> ValidationReport {
    use ViolationKind::*;
    let mut report = ValidationReport::default();

    let mut patient_ids = HashSet::new();
    for p in &cohort.patients {
        let rec = format!("patient:{}", p.patient_id);
        if !patient_ids.insert(p.patient_id.as_str()) {
            report.push(DuplicateKey, rec.clone(), "patient_id is not unique");
        }
        if p.stage.is_some() && !p.cancer_status {
            report.push(InvariantBreach, rec.clone(), "stage given for a non-cancer patient");
        }
        if !p.age.is_finite() || p.age < 0.0 {
            report.push(InvariantBreach, rec, format!("age {} is not a valid age", p.age));
        }
    }

    let mut scan_ids = HashSet::new();
    for s in &cohort.scans {
        let rec = format!("scan:{}", s.scan_id);
        if !scan_ids.insert(s.scan_id.as_str()) {
            report.push(DuplicateKey, rec.clone(), "scan_id is not unique");
        }
        if !patient_ids.contains(s.patient_id.as_str()) {
            report.push(
                DanglingKey,
                rec.clone(),
                format!("unknown patient_id `{}`", s.patient_id),
            );
        }
        if !s.spacing.iter().all(|&x| positive(x)) {
            report.push(
                InvariantBreach,
                rec.clone(),
                "spacing components must be strictly positive",
            );
        }
        if !positive(s.slice_thickness) {
            report.push(InvariantBreach, rec, "slice_thickness must be strictly positive");
        }
    }

    // acquisition_day must increase with the timepoint index within a patient
    let mut per_patient: BTreeMap<&str, Vec<&ScanRecord>> = BTreeMap::new();
    for s in &cohort.scans {
        per_patient.entry(s.patient_id.as_str()).or_default().push(s);
    }
    for (pid, mut scans) in per_patient {
        scans.sort_by_key(|s| (s.timepoint, s.acquisition_day));
        for w in scans.windows(2) {
            if w[0].timepoint < w[1].timepoint && w[0].acquisition_day >= w[1].acquisition_day {
                report.push(
                    InvariantBreach,
                    format!("patient:{pid}"),
                    format!(
                        "scan `{}` (timepoint {}) is not acquired before scan `{}` (timepoint {})",
                        w[0].scan_id, w[0].timepoint, w[1].scan_id, w[1].timepoint
                    ),
                );
            }
        }
    }

    let mut nodule_ids = HashSet::new();
    let mut longitudinal_per_scan = HashSet::new();
    for n in &cohort.gt_nodules {
        let rec = format!("gt:{}", n.nodule_id);
        if !nodule_ids.insert(n.nodule_id.as_str()) {
            report.push(DuplicateKey, rec.clone(), "nodule_id is not unique");
        }
        if !scan_ids.contains(n.scan_id.as_str()) {
            report.push(DanglingKey, rec.clone(), format!("unknown scan_id `{}`", n.scan_id));
        }
        if !n.bbox.is_valid() {
            report.push(InvariantBreach, rec.clone(), "bbox min must be < max on every axis");
        }
        if let Some(v) = n.volume.filter(|&v| !positive(v)) {
            report.push(InvariantBreach, rec.clone(), format!("volume {v} must be > 0"));
        }
        if let Some(d) = n.diameter.filter(|&d| !positive(d)) {
            report.push(InvariantBreach, rec.clone(), format!("diameter {d} must be > 0"));
        }
        if let Some(lid) = &n.longitudinal_id {
            if !longitudinal_per_scan.insert((n.scan_id.as_str(), lid.as_str())) {
                report.push(
                    InvariantBreach,
                    rec,
                    format!("longitudinal_id `{lid}` used twice on scan `{}`", n.scan_id),
                );
            }
        }
    }

    let mut detection_ids = HashSet::new();
    for d in &cohort.detections {
        let rec = format!("detection:{}", d.detection_id);
        if !detection_ids.insert(d.detection_id.as_str()) {
            report.push(DuplicateKey, rec.clone(), "detection_id is not unique");
        }
        if !scan_ids.contains(d.scan_id.as_str()) {
            report.push(DanglingKey, rec.clone(), format!("unknown scan_id `{}`", d.scan_id));
        }
        if !(0.0..=1.0).contains(&d.score) {
            report.push(
                InvariantBreach,
                rec.clone(),
                format!("score {} outside [0, 1]", d.score),
            );
        }
        if !d.bbox.is_valid() {
            report.push(InvariantBreach, rec, "bbox min must be < max on every axis");
        }
    }

    for a in &cohort.annotations {
        let rec = format!("reader:{}@{}", a.reader_id, a.scan_id);
        if !scan_ids.contains(a.scan_id.as_str()) {
            report.push(DanglingKey, rec.clone(), format!("unknown scan_id `{}`", a.scan_id));
        }
        for f in &a.findings {
            if !(1..=10).contains(&f.malignancy_score) {
                report.push(
                    InvariantBreach,
                    rec.clone(),
                    format!("malignancy_score {} outside 1..=10", f.malignancy_score),
                );
            }
        }
    }

    report
}
