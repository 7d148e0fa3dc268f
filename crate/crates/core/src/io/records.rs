//! Line-delimited record files (`*.ndrec`): one JSON object per line.
//!
//! Blank lines are skipped. Every record is checked against its type
//! invariants while reading, so a bad value is reported with the file, the
//! line number and the offending field.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::MaskStore;
use crate::error::{Error, Result};
use crate::model::{Cohort, Detection, GtNodule, PatientRecord, ReaderAnnotation, ScanRecord};

pub const PATIENTS_FILE: &str = "patients.ndrec";
pub const SCANS_FILE: &str = "scans.ndrec";
pub const GT_FILE: &str = "gt.ndrec";
pub const DETECTIONS_FILE: &str = "detections.ndrec";
pub const READERS_FILE: &str = "readers.ndrec";
pub const MASKS_DIR: &str = "masks";

/// A record type stored in an `.ndrec` file.
pub trait Record: Serialize + DeserializeOwned {
    /// Primary key; `None` for records without one (reader annotations).
    fn key(&self) -> Option<String>;

    /// Type invariants, reported as `(field, message)`.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        Ok(())
    }
}

fn positive(field: &'static str, v: Option<f64>) -> std::result::Result<(), (&'static str, String)> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err((field, format!("must be > 0, got {x}"))),
        _ => Ok(()),
    }
}

impl Record for PatientRecord {
    fn key(&self) -> Option<String> {
        Some(self.patient_id.clone())
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.stage.is_some() && !self.cancer_status {
            return Err(("stage", "stage given for a patient without cancer".into()));
        }
        Ok(())
    }
}

impl Record for ScanRecord {
    fn key(&self) -> Option<String> {
        Some(self.scan_id.clone())
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(("spacing", format!("components must be > 0, got {:?}", self.spacing)));
        }
        Ok(())
    }
}

impl Record for GtNodule {
    fn key(&self) -> Option<String> {
        Some(self.nodule_id.clone())
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if !self.bbox.is_valid() {
            return Err(("bbox", "min corner must be below max corner on every axis".into()));
        }
        positive("diameter_mm", self.diameter)?;
        positive("volume_mm3", self.volume)
    }
}

impl Record for Detection {
    fn key(&self) -> Option<String> {
        Some(self.detection_id.clone())
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(("score", format!("must lie in [0, 1], got {}", self.score)));
        }
        if !self.bbox.is_valid() {
            return Err(("bbox", "min corner must be below max corner on every axis".into()));
        }
        positive("diameter_mm", self.derived_diameter)?;
        positive("volume_mm3", self.derived_volume)
    }
}

/// One row of a prediction table: an id, an optional binary label and any
/// number of named numeric columns.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PredictionRow {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
    #[serde(flatten)]
    pub values: std::collections::BTreeMap<String, f64>,
}

impl Record for PredictionRow {
    fn key(&self) -> Option<String> {
        Some(self.id.clone())
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        match self.values.iter().find(|(_, v)| !v.is_finite()) {
            Some((k, v)) => Err(("values", format!("column `{k}` is not finite: {v}"))),
            None => Ok(()),
        }
    }
}

impl Record for ReaderAnnotation {
    fn key(&self) -> Option<String> {
        None
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        for f in &self.findings {
            if !(1..=10).contains(&f.malignancy_score) {
                return Err((
                    "malignancy_score",
                    format!("must lie in 1..=10, got {}", f.malignancy_score),
                ));
            }
            if !f.bbox.is_valid() {
                return Err(("bbox", "min corner must be below max corner on every axis".into()));
            }
        }
        Ok(())
    }
}

/// Field named by a serde error: the path when there is one, otherwise the
/// field quoted in a "missing field" message.
fn field_of(path: &serde_path_to_error::Path, message: &str) -> String {
    let p = path.to_string();
    if p != "." && !p.is_empty() {
        return p;
    }
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    "record".into()
}

fn parse_line<T: Record>(line: &str, file: &str, lineno: usize) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(line);
    let rec: T = serde_path_to_error::deserialize(de).map_err(|e| {
        let message = e.inner().to_string();
        Error::Parse {
            file: file.into(),
            line: lineno,
            field: field_of(e.path(), &message),
            message,
        }
    })?;
    rec.check().map_err(|(field, message)| Error::Parse {
        file: file.into(),
        line: lineno,
        field: field.into(),
        message,
    })?;
    Ok(rec)
}

/// Parse records from any line source; `file` labels error messages.
pub fn parse_records<T: Record>(reader: impl BufRead, file: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut keys = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(file, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = parse_line(&line, file, i + 1)?;
        if let Some(k) = rec.key() {
            if !keys.insert(k.clone()) {
                return Err(Error::DuplicateKey {
                    file: file.into(),
                    key: k,
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records<T: Record>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(BufReader::new(f), &path.display().to_string())
}

pub fn write_records<T: Record>(path: &Path, records: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Locations of the cohort files. Missing optional files read as empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CohortPaths {
    pub patients: Option<PathBuf>,
    pub scans: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub readers: Option<PathBuf>,
    pub masks: Option<PathBuf>,
}

impl CohortPaths {
    /// Standard file names inside `dir`; only existing entries are kept.
    pub fn in_dir(dir: &Path) -> Self {
        let pick = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        CohortPaths {
            patients: pick(PATIENTS_FILE),
            scans: pick(SCANS_FILE),
            gt: pick(GT_FILE),
            detections: pick(DETECTIONS_FILE),
            readers: pick(READERS_FILE),
            masks: pick(MASKS_DIR),
        }
    }

    /// Every input file, in a fixed order.
    pub fn files(&self) -> Vec<&Path> {
        [&self.patients, &self.scans, &self.gt, &self.detections, &self.readers]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path)
            .collect()
    }
}

fn read_opt<T: Record>(path: &Option<PathBuf>) -> Result<Vec<T>> {
    path.as_deref().map_or(Ok(Vec::new()), read_records)
}

/// Read every cohort file. Masks stay on disk and are loaded on demand.
pub fn read_cohort(paths: &CohortPaths) -> Result<(Cohort, MaskStore)> {
    let cohort = Cohort {
        patients: read_opt(&paths.patients)?,
        scans: read_opt(&paths.scans)?,
        gt_nodules: read_opt(&paths.gt)?,
        detections: read_opt(&paths.detections)?,
        annotations: read_opt(&paths.readers)?,
    };
    let masks = paths.masks.clone().map_or(MaskStore::None, MaskStore::Dir);
    Ok((cohort, masks))
}

/// Write a cohort with the standard file names; returns the paths written.
pub fn write_cohort(dir: &Path, cohort: &Cohort) -> Result<CohortPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = CohortPaths {
        patients: Some(dir.join(PATIENTS_FILE)),
        scans: Some(dir.join(SCANS_FILE)),
        gt: Some(dir.join(GT_FILE)),
        detections: Some(dir.join(DETECTIONS_FILE)),
        readers: Some(dir.join(READERS_FILE)),
        masks: None,
    };
    write_records(paths.patients.as_deref().unwrap(), &cohort.patients)?;
    write_records(paths.scans.as_deref().unwrap(), &cohort.scans)?;
    write_records(paths.gt.as_deref().unwrap(), &cohort.gt_nodules)?;
    write_records(paths.detections.as_deref().unwrap(), &cohort.detections)?;
    write_records(paths.readers.as_deref().unwrap(), &cohort.annotations)?;
    Ok(paths)
}
