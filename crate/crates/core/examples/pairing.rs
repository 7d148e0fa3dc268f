//! Box IoU and greedy pairing of detections with ground-truth nodules.

use cadeval::geometry::{iou, BoundingBox3D};
use cadeval::io::{synth_cohort, SynthSpec};
use cadeval::matching::pair;
use cadeval::model::Label;

fn main() -> cadeval::Result<()> {
    let a = BoundingBox3D::from([0, 0, 0, 10, 10, 10]);
    let b = BoundingBox3D::from([5, 0, 0, 15, 10, 10]);
    println!("IoU of two half-overlapping cubes: {:.4}", iou(&a, &b));

    let c = synth_cohort(&SynthSpec {
        n_patients: 20,
        false_positives_per_scan: 1.0,
        seed: 1,
        ..Default::default()
    })?
    .cohort;
    let p = pair(&c.gt_nodules, &c.detections, 0.1, &[Label::Malignant, Label::Benign]);
    println!(
        "{} assignments, {} unmatched detections, {} undetected nodules, {} ambiguous",
        p.assignments.len(),
        p.unmatched_detections.len(),
        p.undetected_gt.len(),
        p.ambiguous.len()
    );
    for (scan, t) in p.per_scan_counts.iter().take(3) {
        println!("{scan}: {t:?}");
    }
    Ok(())
}
