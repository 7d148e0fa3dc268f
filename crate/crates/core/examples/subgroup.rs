//! Per-subgroup AUC and scanner kernel classification.

use std::collections::HashMap;

use cadeval::io::{synth_cohort, SynthSpec};
use cadeval::metrics::auc;
use cadeval::subgroup::{kernel_sharpness, stratify, Axis, StratifierConfig};

fn main() -> cadeval::Result<()> {
    for (m, k) in [
        ("SIEMENS", "B70f"),
        ("GE MEDICAL SYSTEMS", "LUNG"),
        ("TOSHIBA", "FC01"),
        ("Philips", "B"),
    ] {
        println!("{m} {k}: {}", kernel_sharpness(m, k).as_str());
    }

    let c = synth_cohort(&SynthSpec {
        n_patients: 500,
        seed: 6,
        ..Default::default()
    })?
    .cohort;
    let scores: HashMap<String, (bool, f64)> = c
        .patient_scores(Some(-1))
        .into_iter()
        .map(|(id, y, s)| (id, (y, s)))
        .collect();
    for axis in [Axis::Manufacturer, Axis::Sex, Axis::AgeBand] {
        for (group, members) in stratify(&c, &StratifierConfig::default_for(axis))? {
            let (l, s): (Vec<bool>, Vec<f64>) = members.iter().filter_map(|p| scores.get(p)).copied().unzip();
            let area = auc(&l, &s).map_or("n/a".to_string(), |a| format!("{a:.3}"));
            println!("{axis:?} {group}: {} patients, AUC {area}", members.len());
        }
    }
    Ok(())
}
