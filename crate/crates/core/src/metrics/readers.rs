use std::collections::{BTreeMap, HashMap};

use super::roc::{roc, Orientation, RocCurve};
use crate::error::{Error, Result};
use crate::model::{PatientRecord, ReaderAnnotation, ScanRecord};

/// Patient-level (label, score) pairs of every reader, concatenated.
///
/// A reader has read a patient when it left an annotation (possibly with no
/// finding) on one of the patient's scans. The patient score is the highest
/// malignancy score the reader gave, 0 without findings; the label is the
/// patient's cancer status. Readers are visited in id order, patients in id
/// order.
pub fn pooled_reader_scores(
    annotations: &[ReaderAnnotation],
    scans: &[ScanRecord],
    patients: &[PatientRecord],
) -> Result<(Vec<bool>, Vec<f64>)> {
    let patient_of: HashMap<&str, &str> = scans
        .iter()
        .map(|s| (s.scan_id.as_str(), s.patient_id.as_str()))
        .collect();
    let status: HashMap<&str, bool> = patients
        .iter()
        .map(|p| (p.patient_id.as_str(), p.cancer_status))
        .collect();
    let mut per_reader: BTreeMap<&str, BTreeMap<&str, u8>> = BTreeMap::new();
    for a in annotations {
        let pid = patient_of
            .get(a.scan_id.as_str())
            .ok_or_else(|| Error::invalid(format!("annotation on unknown scan `{}`", a.scan_id)))?;
        let best = a.findings.iter().map(|f| f.malignancy_score).max().unwrap_or(0);
        let e = per_reader
            .entry(a.reader_id.as_str())
            .or_default()
            .entry(pid)
            .or_insert(0);
        *e = (*e).max(best);
    }
    if per_reader.is_empty() {
        return Err(Error::Empty("no reader annotation"));
    }
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    for patients_read in per_reader.values() {
        for (pid, &s) in patients_read {
            let label = status
                .get(pid)
                .ok_or_else(|| Error::invalid(format!("annotation for unknown patient `{pid}`")))?;
            labels.push(*label);
            scores.push(s as f64);
        }
    }
    Ok((labels, scores))
}

/// ROC of all readers pooled as one, assuming equivalent readers.
pub fn pooled_reader_roc(
    annotations: &[ReaderAnnotation],
    scans: &[ScanRecord],
    patients: &[PatientRecord],
    orientation: Orientation,
) -> Result<RocCurve> {
    let (labels, scores) = pooled_reader_scores(annotations, scans, patients)?;
    roc(&labels, &scores, orientation)
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("pearson inputs differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}
