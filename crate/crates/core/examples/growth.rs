//! Volume doubling time and related growth measures of linked nodule pairs.

use cadeval::growth::{growth_records, nelson_categorize, rdt, vdt, volume_growth, GrowthOptions};
use cadeval::io::{synth_cohort, SynthSpec};
use cadeval::matching::{link_longitudinal, pair};
use cadeval::metrics::auc;
use cadeval::model::Label;

fn main() -> cadeval::Result<()> {
    // a nodule growing from 100 to 150 mm3 over 180 days
    let d = vdt(100.0, 150.0, 0.0, 180.0)?;
    println!(
        "VDT {d:.1} days, RDT {:.3} per year, growth {:.1}%",
        rdt(d)?,
        volume_growth(100.0, 150.0)?
    );
    let (nod, grow) = nelson_categorize(150.0, d);
    println!("Nelson categories {nod:?} / {grow:?}");

    let c = synth_cohort(&SynthSpec {
        n_patients: 300,
        seed: 4,
        ..Default::default()
    })?
    .cohort;
    let p = pair(&c.gt_nodules, &c.detections, 0.1, &[Label::Malignant, Label::Benign]);
    let linked = link_longitudinal(&c.gt_nodules, &c.scans, &p, &p);
    let recs = growth_records(&linked, &GrowthOptions::new())?;
    let labels: Vec<bool> = recs.iter().map(|r| r.linked.label.is_malignant()).collect();
    let measure = |f: fn(&cadeval::growth::GrowthRecord) -> f64| recs.iter().map(f).collect::<Vec<f64>>();
    println!("{} linked nodules", recs.len());
    println!("AUC of VDT          {:.3}", auc(&labels, &measure(|r| r.vdt))?);
    println!("AUC of volume delta {:.3}", auc(&labels, &measure(|r| r.delta_volume))?);
    println!("AUC of RDT          {:.3}", auc(&labels, &measure(|r| r.rdt))?);
    Ok(())
}
