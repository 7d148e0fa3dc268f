//! Seeded synthetic cohorts with two timepoints per patient.
//!
//! Patient `i` draws all of its content from ChaCha8 stream `i` of the
//! spec seed, so records never depend on generation order. Volumes follow
//! `V1 = V2·2^(Δt/VDT)`, the exact inverse of the Schwartz formula.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use super::mask::MaskContainer;
use super::records::{write_cohort, CohortPaths, MASKS_DIR};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox3D;
use crate::model::{
    Attributes, Cohort, Detection, GtNodule, Label, PatientRecord, ReaderAnnotation, ReaderFinding, ScanRecord, Sex,
};

/// Beta law parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaLaw {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        BetaLaw { alpha, beta }
    }

    fn sampler(self) -> Result<Beta<f64>> {
        Beta::new(self.alpha, self.beta).map_err(|e| Error::invalid(format!("beta law: {e}")))
    }
}

/// Log-normal law given by its median and the standard deviation of the log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalLaw {
    pub median: f64,
    pub sigma: f64,
}

impl LogNormalLaw {
    fn sampler(self) -> Result<LogNormal<f64>> {
        LogNormal::new(self.median.ln(), self.sigma).map_err(|e| Error::invalid(format!("log-normal law: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_patients: usize,
    pub cancer_prevalence: f64,
    pub malignant_score: BetaLaw,
    pub benign_score: BetaLaw,
    pub malignant_vdt: LogNormalLaw,
    pub benign_vdt: LogNormalLaw,
    /// Fraction of benign nodules that shrink (negated doubling time).
    pub shrink_fraction: f64,
    /// Nodule radius range at the prior scan, mm.
    pub radius_mm: (f64, f64),
    /// Mean count of extra benign nodules per patient.
    pub extra_benign_nodules: f64,
    /// Mean count of false-positive detections per scan.
    pub false_positives_per_scan: f64,
    /// Readers annotating every latest scan; 0 for none.
    pub n_readers: usize,
    /// Emit a spherical mask for every ground-truth nodule.
    pub masks: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_patients: 200,
            cancer_prevalence: 0.3,
            malignant_score: BetaLaw::new(8.0, 2.0),
            benign_score: BetaLaw::new(2.0, 8.0),
            malignant_vdt: LogNormalLaw {
                median: 365.0,
                sigma: 0.4,
            },
            benign_vdt: LogNormalLaw {
                median: 1500.0,
                sigma: 0.5,
            },
            shrink_fraction: 0.2,
            radius_mm: (2.5, 12.0),
            extra_benign_nodules: 0.5,
            false_positives_per_scan: 0.5,
            n_readers: 0,
            masks: false,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn check(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(0.0..=1.0).contains(&self.cancer_prevalence) || !(0.0..=1.0).contains(&self.shrink_fraction) {
            return Err(Error::invalid("prevalence and shrink fraction must lie in [0, 1]"));
        }
        let laws = [self.malignant_score, self.benign_score];
        if laws.iter().any(|l| !positive(l.alpha) || !positive(l.beta)) {
            return Err(Error::invalid("beta parameters must be positive"));
        }
        let vdts = [self.malignant_vdt, self.benign_vdt];
        if vdts.iter().any(|l| !positive(l.median) || !positive(l.sigma)) {
            return Err(Error::invalid("vdt law parameters must be positive"));
        }
        if !positive(self.radius_mm.0) || !(self.radius_mm.0 <= self.radius_mm.1) {
            return Err(Error::invalid("radius range must be positive and ordered"));
        }
        if self.extra_benign_nodules < 0.0 || self.false_positives_per_scan < 0.0 {
            return Err(Error::invalid("mean counts must be nonnegative"));
        }
        Ok(())
    }
}

/// A generated cohort and its masks keyed by `mask_ref`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub cohort: Cohort,
    pub masks: BTreeMap<String, MaskContainer>,
}

pub const SYNTH_SPACING: [f64; 3] = [1.25, 0.7, 0.7];
const MANUFACTURERS: [(&str, &str); 3] = [("SIEMENS", "B50f"), ("GE MEDICAL SYSTEMS", "LUNG"), ("TOSHIBA", "FC01")];
const STAGES: [(&str, f64); 5] = [("IA", 0.6), ("IB", 0.15), ("II", 0.1), ("III", 0.1), ("IV", 0.05)];

pub fn sphere_volume(radius_mm: f64) -> f64 {
    4.0 / 3.0 * std::f64::consts::PI * radius_mm.powi(3)
}

pub fn sphere_diameter(volume_mm3: f64) -> f64 {
    2.0 * (3.0 * volume_mm3 / (4.0 * std::f64::consts::PI)).cbrt()
}

/// Box of a sphere at `center` (voxel index space) with radius in mm.
fn sphere_bbox(center: [i64; 3], radius_mm: f64) -> BoundingBox3D {
    let r: Vec<i64> = SYNTH_SPACING.iter().map(|s| (radius_mm / s).ceil() as i64).collect();
    BoundingBox3D::new(
        [center[0] - r[0], center[1] - r[1], center[2] - r[2]],
        [center[0] + r[0] + 1, center[1] + r[1] + 1, center[2] + r[2] + 1],
    )
}

/// Voxels whose centers lie within `radius_mm` of the center voxel's center.
pub fn sphere_mask(center: [i64; 3], radius_mm: f64, spacing: [f64; 3]) -> Result<MaskContainer> {
    let r: Vec<i64> = spacing.iter().map(|s| (radius_mm / s).ceil() as i64).collect();
    let mut vox = Vec::new();
    for dz in -r[0]..=r[0] {
        for dy in -r[1]..=r[1] {
            for dx in -r[2]..=r[2] {
                let d2 = (dz as f64 * spacing[0]).powi(2)
                    + (dy as f64 * spacing[1]).powi(2)
                    + (dx as f64 * spacing[2]).powi(2);
                if d2 <= radius_mm * radius_mm {
                    vox.push([center[0] + dz, center[1] + dy, center[2] + dx]);
                }
            }
        }
    }
    MaskContainer::from_global_voxels(&vox, spacing)
}

struct Laws {
    mal_score: Beta<f64>,
    ben_score: Beta<f64>,
    mal_vdt: LogNormal<f64>,
    ben_vdt: LogNormal<f64>,
    extra: Option<Poisson<f64>>,
    fps: Option<Poisson<f64>>,
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::invalid(format!("poisson law: {e}")))
}

fn count(rng: &mut ChaCha8Rng, law: &Option<Poisson<f64>>) -> usize {
    law.as_ref().map_or(0, |p| p.sample(rng) as usize)
}

fn reader_score(rng: &mut ChaCha8Rng, law: &Beta<f64>) -> u8 {
    1 + ((law.sample(rng) * 10.0) as u8).min(9)
}

fn generate_patient(spec: &SynthSpec, laws: &Laws, i: usize, out: &mut SynthCohort) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(i as u64);
    let pid = format!("P{i:05}");
    let cancer = rng.gen::<f64>() < spec.cancer_prevalence;
    let stage = cancer.then(|| {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        STAGES
            .iter()
            .find(|(_, w)| {
                acc += w;
                u < acc
            })
            .map_or("IV", |s| s.0)
            .to_string()
    });
    let (manufacturer, kernel) = MANUFACTURERS[rng.gen_range(0..MANUFACTURERS.len())];
    out.cohort.patients.push(PatientRecord {
        patient_id: pid.clone(),
        cancer_status: cancer,
        stage,
        age: rng.gen_range(55..=77) as f64,
        sex: if rng.gen::<bool>() { Sex::Male } else { Sex::Female },
        dataset: "SYNTH".into(),
        copd: None,
        attributes: Attributes::new(),
    });

    let day_1: i64 = rng.gen_range(300..=430);
    let scan_ids = [format!("{pid}-T2"), format!("{pid}-T1")];
    for (k, (tp, day)) in [(-2, 0), (-1, day_1)].into_iter().enumerate() {
        out.cohort.scans.push(ScanRecord {
            scan_id: scan_ids[k].clone(),
            patient_id: pid.clone(),
            timepoint: tp,
            acquisition_day: day,
            manufacturer: manufacturer.into(),
            kernel: kernel.into(),
            slice_thickness: SYNTH_SPACING[0],
            spacing: SYNTH_SPACING,
            attributes: Attributes::new(),
        });
    }

    let mut labels = Vec::new();
    if cancer {
        labels.push(Label::Malignant);
    }
    let extra = count(&mut rng, &laws.extra);
    labels.extend(std::iter::repeat_n(Label::Benign, extra + usize::from(!cancer)));

    let mut reader_findings: Vec<Vec<ReaderFinding>> = vec![Vec::new(); spec.n_readers];
    for (j, &label) in labels.iter().enumerate() {
        let malignant = label.is_malignant();
        let r0 = rng.gen_range(spec.radius_mm.0..=spec.radius_mm.1);
        let mut vdt = if malignant {
            laws.mal_vdt.sample(&mut rng)
        } else {
            laws.ben_vdt.sample(&mut rng)
        };
        if !malignant && rng.gen::<f64>() < spec.shrink_fraction {
            vdt = -vdt;
        }
        let v2 = sphere_volume(r0);
        let v1 = v2 * 2f64.powf(day_1 as f64 / vdt);
        // nodules sit on a coarse lattice so that they never overlap
        let center = [40 + 60 * j as i64, 256, 256];
        let lid = format!("{pid}-N{j}");
        for (k, v) in [v2, v1].into_iter().enumerate() {
            let d = sphere_diameter(v);
            let bbox = sphere_bbox(center, d / 2.0);
            let nid = format!("{lid}-{}", ["T2", "T1"][k]);
            let mask_ref = spec.masks.then(|| nid.clone());
            if let Some(r) = &mask_ref {
                out.masks
                    .insert(r.clone(), sphere_mask(center, d / 2.0, SYNTH_SPACING)?);
            }
            out.cohort.gt_nodules.push(GtNodule {
                nodule_id: nid.clone(),
                scan_id: scan_ids[k].clone(),
                label,
                bbox,
                mask_ref,
                diameter: Some(d),
                volume: Some(v),
                longitudinal_id: Some(lid.clone()),
                attributes: Attributes::new(),
            });
            let law = if malignant { &laws.mal_score } else { &laws.ben_score };
            out.cohort.detections.push(Detection {
                detection_id: format!("{nid}-D"),
                scan_id: scan_ids[k].clone(),
                score: law.sample(&mut rng),
                bbox,
                mask_ref: None,
                derived_diameter: Some(d),
                derived_volume: Some(v),
                attributes: Attributes::new(),
            });
            if k == 1 {
                for f in reader_findings.iter_mut() {
                    f.push(ReaderFinding {
                        bbox,
                        malignancy_score: reader_score(&mut rng, law),
                    });
                }
            }
        }
    }

    for scan_id in &scan_ids {
        for f in 0..count(&mut rng, &laws.fps) {
            let r = rng.gen_range(spec.radius_mm.0..=spec.radius_mm.1);
            let center = [40 + 60 * f as i64, 100, 100];
            let bbox = sphere_bbox(center, r);
            let d = 2.0 * r;
            out.cohort.detections.push(Detection {
                detection_id: format!("{scan_id}-F{f}"),
                scan_id: scan_id.clone(),
                score: laws.ben_score.sample(&mut rng),
                bbox,
                mask_ref: None,
                derived_diameter: Some(d),
                derived_volume: Some(sphere_volume(r)),
                attributes: Attributes::new(),
            });
        }
    }

    for (r, findings) in reader_findings.into_iter().enumerate() {
        out.cohort.annotations.push(ReaderAnnotation {
            reader_id: format!("R{r}"),
            scan_id: scan_ids[1].clone(),
            findings,
            attributes: Attributes::new(),
        });
    }
    Ok(())
}

/// Generate the cohort described by `spec`.
pub fn synth_cohort(spec: &SynthSpec) -> Result<SynthCohort> {
    spec.check()?;
    let laws = Laws {
        mal_score: spec.malignant_score.sampler()?,
        ben_score: spec.benign_score.sampler()?,
        mal_vdt: spec.malignant_vdt.sampler()?,
        ben_vdt: spec.benign_vdt.sampler()?,
        extra: poisson(spec.extra_benign_nodules)?,
        fps: poisson(spec.false_positives_per_scan)?,
    };
    let mut out = SynthCohort {
        cohort: Cohort::default(),
        masks: BTreeMap::new(),
    };
    for i in 0..spec.n_patients {
        generate_patient(spec, &laws, i, &mut out)?;
    }
    out.cohort
        .annotations
        .sort_by(|a, b| (&a.reader_id, &a.scan_id).cmp(&(&b.reader_id, &b.scan_id)));
    Ok(out)
}

/// Write the cohort files and, when present, the masks directory.
pub fn write_synth(dir: &Path, synth: &SynthCohort) -> Result<CohortPaths> {
    let mut paths = write_cohort(dir, &synth.cohort)?;
    if !synth.masks.is_empty() {
        let mdir = dir.join(MASKS_DIR);
        std::fs::create_dir_all(&mdir).map_err(|e| Error::io(&mdir, e))?;
        for (name, m) in &synth.masks {
            m.write_vmask(&super::MaskStore::path_for(&mdir, name))?;
        }
        paths.masks = Some(mdir);
    }
    Ok(paths)
}
