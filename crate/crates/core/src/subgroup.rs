//! Cohort stratification along the usual subgroup axes.
//!
//! Every stratification is a complete partition: records missing the axis
//! field land in `unknown`, values outside every bin land in `other`.
//! Scan-level axes (manufacturer, slice thickness, kernel) take the value
//! of the patient's latest scan.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cohort, ScanRecord, Sex};

pub const UNKNOWN: &str = "unknown";
pub const OTHER: &str = "other";

/// Group label -> ids.
pub type Groups = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    DiameterRange,
    StageGroup,
    Manufacturer,
    SliceThickness,
    KernelSharpness,
    Sex,
    AgeBand,
    Dataset,
    Copd,
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            format!("unknown axis `{s}`; expected diameter_range, stage_group, manufacturer, slice_thickness, kernel_sharpness, sex, age_band, dataset or copd")
        })
    }
}

/// A numeric bin, closed below; `high_closed` closes it above too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub high_closed: bool,
}

impl Bin {
    pub const fn new(low: f64, high: f64) -> Self {
        Bin {
            low,
            high,
            high_closed: false,
        }
    }

    pub const fn closed(low: f64, high: f64) -> Self {
        Bin {
            low,
            high,
            high_closed: true,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.low && (x < self.high || (self.high_closed && x == self.high))
    }

    pub fn label(&self) -> String {
        let high = if self.high >= f64::MAX {
            "inf".to_string()
        } else {
            self.high.to_string()
        };
        format!("[{},{high}{}", self.low, if self.high_closed { "]" } else { ")" })
    }
}

fn check_bins(bins: &[Bin]) -> Result<()> {
    for b in bins {
        if !(b.low < b.high) {
            return Err(Error::invalid(format!("bin {} is empty", b.label())));
        }
    }
    for w in bins.windows(2) {
        if w[1].low < w[0].high || (w[1].low == w[0].high && w[0].high_closed) {
            return Err(Error::invalid(format!(
                "bins {} and {} overlap or are unordered",
                w[0].label(),
                w[1].label()
            )));
        }
    }
    Ok(())
}

fn bin_label(bins: &[Bin], x: Option<f64>) -> String {
    match x {
        None => UNKNOWN.into(),
        Some(x) if x.is_nan() => UNKNOWN.into(),
        Some(x) => bins.iter().find(|b| b.contains(x)).map_or(OTHER.into(), Bin::label),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiameterSource {
    /// Ground-truth nodule diameters.
    #[default]
    Gt,
    /// Diameters derived from the detections.
    Model,
}

impl std::str::FromStr for DiameterSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gt" => Ok(DiameterSource::Gt),
            "model" => Ok(DiameterSource::Model),
            _ => Err(format!("diameter source must be gt or model, got `{s}`")),
        }
    }
}

pub fn default_diameter_bins() -> Vec<Bin> {
    vec![Bin::new(4.0, 10.0), Bin::new(10.0, 20.0), Bin::closed(20.0, 30.0)]
}

pub fn nlst_slice_bins() -> Vec<Bin> {
    vec![Bin::new(0.5, 1.5), Bin::new(1.5, 2.3), Bin::closed(2.3, 3.5)]
}

pub fn ic_slice_bins() -> Vec<Bin> {
    vec![Bin::new(0.5, 0.8), Bin::new(0.8, 1.5), Bin::closed(1.5, 3.0)]
}

pub fn default_age_bins() -> Vec<Bin> {
    vec![Bin::new(0.0, 60.0), Bin::new(60.0, 70.0), Bin::new(70.0, f64::MAX)]
}

/// Axis plus its parameters. Unused fields are ignored by other axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifierConfig {
    pub axis: Axis,
    #[serde(default)]
    pub bins: Vec<Bin>,
    /// Slice-thickness bins per dataset name (case-insensitive); datasets
    /// not listed use `bins`.
    #[serde(default)]
    pub bins_by_dataset: BTreeMap<String, Vec<Bin>>,
    #[serde(default)]
    pub diameter_source: DiameterSource,
}

impl StratifierConfig {
    /// Shipped defaults for each axis.
    pub fn default_for(axis: Axis) -> Self {
        let mut cfg = StratifierConfig {
            axis,
            bins: Vec::new(),
            bins_by_dataset: BTreeMap::new(),
            diameter_source: DiameterSource::Gt,
        };
        match axis {
            Axis::DiameterRange => cfg.bins = default_diameter_bins(),
            Axis::SliceThickness => {
                cfg.bins = ic_slice_bins();
                cfg.bins_by_dataset.insert("NLST".into(), nlst_slice_bins());
            }
            Axis::AgeBand => cfg.bins = default_age_bins(),
            _ => {}
        }
        cfg
    }

    pub fn check(&self) -> Result<()> {
        check_bins(&self.bins)?;
        let mut seen = BTreeSet::new();
        for (k, b) in &self.bins_by_dataset {
            if !seen.insert(k.to_ascii_uppercase()) {
                return Err(Error::invalid(format!("dataset `{k}` listed twice")));
            }
            check_bins(b)?;
        }
        let numeric = matches!(self.axis, Axis::DiameterRange | Axis::SliceThickness | Axis::AgeBand);
        if numeric && self.bins.is_empty() {
            return Err(Error::invalid(format!("axis {:?} needs bins", self.axis)));
        }
        Ok(())
    }
}

/// Stage group of a patient: `1a`, `1b`, `late` (stage II and beyond),
/// `non_cancer` or `unknown`. Stage I as a whole is `1a` ∪ `1b`.
pub fn stage_group(cancer_status: bool, stage: Option<&str>) -> &'static str {
    if !cancer_status {
        return "non_cancer";
    }
    let Some(stage) = stage else {
        return UNKNOWN;
    };
    let s: String = stage
        .to_ascii_uppercase()
        .replace("STAGE", "")
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let late = ["IV", "III", "II", "4", "3", "2"];
    if late.iter().any(|p| s.starts_with(p)) {
        "late"
    } else if s.starts_with("IA") || s.starts_with("1A") {
        "1a"
    } else if s.starts_with("IB") || s.starts_with("1B") {
        "1b"
    } else {
        UNKNOWN
    }
}

/// Canonical manufacturer name; vendor spellings are pooled by substring.
pub fn normalize_manufacturer(name: &str) -> String {
    let n = name.trim().to_ascii_uppercase();
    if n.is_empty() {
        return UNKNOWN.into();
    }
    let known = [
        ("SIEMENS", "SIEMENS"),
        ("GE MEDICAL", "GE"),
        ("GENERAL ELECTRIC", "GE"),
        ("TOSHIBA", "TOSHIBA"),
        ("CANON", "CANON"),
        ("PHILIPS", "PHILIPS"),
    ];
    if let Some((_, canon)) = known.iter().find(|(k, _)| n.contains(k)) {
        return (*canon).into();
    }
    if n == "GE" || n.starts_with("GE ") {
        return "GE".into();
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharpness {
    ExtraSharp,
    Sharp,
    Smooth,
    Unknown,
}

impl Sharpness {
    pub fn as_str(self) -> &'static str {
        match self {
            Sharpness::ExtraSharp => "extra_sharp",
            Sharpness::Sharp => "sharp",
            Sharpness::Smooth => "smooth",
            Sharpness::Unknown => UNKNOWN,
        }
    }
}

/// Sharpness class -> manufacturer (lowercase) -> kernel names.
pub type KernelLists = BTreeMap<String, BTreeMap<String, Vec<String>>>;

const SHIPPED_KERNELS: &str = include_str!("../data/kernels.json");

/// The shipped kernel-sharpness lists.
pub fn shipped_kernel_lists() -> &'static KernelLists {
    static LISTS: OnceLock<KernelLists> = OnceLock::new();
    LISTS.get_or_init(|| serde_json::from_str(SHIPPED_KERNELS).expect("shipped kernel lists parse"))
}

/// Sharpness of a (manufacturer, kernel) pair in the given lists. The
/// kernel is matched exactly first, then with surrounding spaces trimmed.
pub fn kernel_sharpness_in(lists: &KernelLists, manufacturer: &str, kernel: &str) -> Sharpness {
    let m = normalize_manufacturer(manufacturer).to_ascii_lowercase();
    let order = [
        ("extra_sharp", Sharpness::ExtraSharp),
        ("sharp", Sharpness::Sharp),
        ("smooth", Sharpness::Smooth),
    ];
    for exact in [true, false] {
        for (key, class) in order {
            let Some(names) = lists.get(key).and_then(|by| by.get(&m)) else {
                continue;
            };
            let hit = if exact {
                names.iter().any(|n| n == kernel)
            } else {
                names.iter().any(|n| n.trim() == kernel.trim())
            };
            if hit {
                return class;
            }
        }
    }
    Sharpness::Unknown
}

pub fn kernel_sharpness(manufacturer: &str, kernel: &str) -> Sharpness {
    kernel_sharpness_in(shipped_kernel_lists(), manufacturer, kernel)
}

/// Latest scan (highest timepoint, then latest day) of every patient.
fn latest_scans(scans: &[ScanRecord]) -> HashMap<&str, &ScanRecord> {
    let mut out: HashMap<&str, &ScanRecord> = HashMap::new();
    for s in scans {
        let e = out.entry(s.patient_id.as_str()).or_insert(s);
        if (s.timepoint, s.acquisition_day, &s.scan_id) > (e.timepoint, e.acquisition_day, &e.scan_id) {
            *e = s;
        }
    }
    out
}

/// Largest diameter per patient from the chosen source.
fn largest_diameter(cohort: &Cohort, source: DiameterSource) -> HashMap<&str, f64> {
    let patient_of: HashMap<&str, &str> = cohort
        .scans
        .iter()
        .map(|s| (s.scan_id.as_str(), s.patient_id.as_str()))
        .collect();
    let sized: Vec<(&str, Option<f64>)> = match source {
        DiameterSource::Gt => cohort
            .gt_nodules
            .iter()
            .map(|n| (n.scan_id.as_str(), n.diameter))
            .collect(),
        DiameterSource::Model => cohort
            .detections
            .iter()
            .map(|d| (d.scan_id.as_str(), d.derived_diameter))
            .collect(),
    };
    let mut out: HashMap<&str, f64> = HashMap::new();
    for (scan, d) in sized {
        if let (Some(&p), Some(d)) = (patient_of.get(scan), d) {
            let e = out.entry(p).or_insert(d);
            *e = e.max(d);
        }
    }
    out
}

fn patient_label(
    cohort: &Cohort,
    cfg: &StratifierConfig,
    pid: &str,
    latest: &HashMap<&str, &ScanRecord>,
    diam: &HashMap<&str, f64>,
) -> String {
    let p = cohort.patient(pid).expect("patient from the cohort");
    let scan = latest.get(pid);
    match cfg.axis {
        Axis::DiameterRange => bin_label(&cfg.bins, diam.get(pid).copied()),
        Axis::StageGroup => stage_group(p.cancer_status, p.stage.as_deref()).into(),
        Axis::Manufacturer => scan.map_or(UNKNOWN.into(), |s| normalize_manufacturer(&s.manufacturer)),
        Axis::SliceThickness => {
            let bins = cfg
                .bins_by_dataset
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(&p.dataset))
                .map_or(&cfg.bins, |(_, b)| b);
            bin_label(bins, scan.map(|s| s.slice_thickness))
        }
        Axis::KernelSharpness => scan.map_or(UNKNOWN.into(), |s| {
            kernel_sharpness(&s.manufacturer, &s.kernel).as_str().into()
        }),
        Axis::Sex => match p.sex {
            Sex::Male => "male".into(),
            Sex::Female => "female".into(),
            Sex::Unknown => UNKNOWN.into(),
        },
        Axis::AgeBand => bin_label(&cfg.bins, Some(p.age)),
        Axis::Dataset => {
            if p.dataset.trim().is_empty() {
                UNKNOWN.into()
            } else {
                p.dataset.clone()
            }
        }
        Axis::Copd => match p.copd {
            Some(true) => "copd".into(),
            Some(false) => "no_copd".into(),
            None => UNKNOWN.into(),
        },
    }
}

/// Partition of the cohort's patients along the configured axis. The
/// diameter axis uses each patient's largest nodule.
pub fn stratify(cohort: &Cohort, cfg: &StratifierConfig) -> Result<Groups> {
    cfg.check()?;
    let latest = latest_scans(&cohort.scans);
    let diam = largest_diameter(cohort, cfg.diameter_source);
    let mut groups = Groups::new();
    for p in &cohort.patients {
        let label = patient_label(cohort, cfg, &p.patient_id, &latest, &diam);
        groups.entry(label).or_default().insert(p.patient_id.clone());
    }
    Ok(groups)
}

/// Partition of individual nodules by their own diameter: ground-truth
/// nodule ids for [`DiameterSource::Gt`], detection ids for
/// [`DiameterSource::Model`].
pub fn stratify_nodules(cohort: &Cohort, bins: &[Bin], source: DiameterSource) -> Result<Groups> {
    check_bins(bins)?;
    let mut groups = Groups::new();
    let items: Vec<(&str, Option<f64>)> = match source {
        DiameterSource::Gt => cohort
            .gt_nodules
            .iter()
            .map(|n| (n.nodule_id.as_str(), n.diameter))
            .collect(),
        DiameterSource::Model => cohort
            .detections
            .iter()
            .map(|d| (d.detection_id.as_str(), d.derived_diameter))
            .collect(),
    };
    for (id, d) in items {
        groups.entry(bin_label(bins, d)).or_default().insert(id.into());
    }
    Ok(groups)
}
