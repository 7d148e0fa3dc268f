//! ROC, FROC, CPM, pooled multi-reader ROC and correlation.

mod froc;
mod readers;
mod roc;

pub use froc::{
    cpm, envelope, froc, interpolate_sensitivity, sensitivity_at_fp, FrocCurve, FrocData, FrocPoint, CPM_FP_THRESHOLDS,
};
pub use readers::{pearson, pooled_reader_roc, pooled_reader_scores};
pub use roc::{auc, roc, OperatingPoint, Orientation, RankedScores, RocCurve, RocPoint};
