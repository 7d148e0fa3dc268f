//! Detection-to-ground-truth pairing, longitudinal links, duplicate
//! reduction and size filtering.

mod dedup;
mod longitudinal;
mod pairing;

pub use dedup::{dedup, in_size_window, size_window_filter, DedupOptions, Finding, MIN_COMPONENT_DIAMETER_MM};
pub use longitudinal::{largest_nodule_at_first_tp, largest_per_patient, link_longitudinal, LinkedPair};
pub use pairing::{
    pair, pair_by_mask, Ambiguity, Assignment, PairingResult, ScanTally, UnmatchedDetection, DEFAULT_IOU_THRESHOLD,
};
