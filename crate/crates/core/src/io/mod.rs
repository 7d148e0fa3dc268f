//! On-disk formats: record files, voxel masks, reports and the synthetic
//! cohort generator.

mod mask;
pub mod records;
pub mod report;
mod synth;

pub use mask::{MaskContainer, MaskStore};
pub use records::{read_cohort, read_records, write_cohort, write_records, CohortPaths, PredictionRow};
pub use report::{write_report, Report, ReportFormat, Table};
pub use synth::{
    sphere_diameter, sphere_mask, sphere_volume, synth_cohort, write_synth, BetaLaw, LogNormalLaw, SynthCohort,
    SynthSpec, SYNTH_SPACING,
};
