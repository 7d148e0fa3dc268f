//! Pair detections with ground truth, then FROC and CPM on a synthetic cohort.

use cadeval::io::{synth_cohort, SynthSpec};
use cadeval::matching::{pair, DEFAULT_IOU_THRESHOLD};
use cadeval::metrics::{cpm, froc, sensitivity_at_fp, CPM_FP_THRESHOLDS};
use cadeval::model::Label;

fn main() -> cadeval::Result<()> {
    let spec = SynthSpec {
        n_patients: 200,
        false_positives_per_scan: 3.0,
        seed: 2,
        ..Default::default()
    };
    let c = synth_cohort(&spec)?.cohort;
    let scans = c.scans.iter().map(|s| s.scan_id.as_str());
    let paired = pair(&c.gt_nodules, &c.detections, DEFAULT_IOU_THRESHOLD, &[Label::Malignant]).with_scans(scans);
    println!(
        "{} of {} malignant nodules detected on {} scans",
        paired.n_detected(),
        paired.targets.len(),
        paired.n_scans()
    );

    let curve = froc(&paired)?;
    for fp in CPM_FP_THRESHOLDS {
        let (sens, achieved) = sensitivity_at_fp(&curve, fp)?;
        println!("{fp:>6} FP/scan: sensitivity {sens:.3} (nearest operating point {achieved:.3})");
    }
    println!("CPM {:.4}", cpm(&curve)?);
    Ok(())
}
