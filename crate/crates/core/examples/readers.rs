//! Pooled ROC of reader annotations next to the model.

use cadeval::io::{synth_cohort, SynthSpec};
use cadeval::metrics::{auc, pooled_reader_roc, Orientation};

fn main() -> cadeval::Result<()> {
    let c = synth_cohort(&SynthSpec {
        n_patients: 300,
        n_readers: 4,
        seed: 9,
        ..Default::default()
    })?
    .cohort;
    let readers = pooled_reader_roc(&c.annotations, &c.scans, &c.patients, Orientation::AsIs)?;
    println!(
        "pooled readers: AUC {:.3}, {} operating points",
        readers.auc,
        readers.points.len()
    );
    let (l, s): (Vec<bool>, Vec<f64>) = c.patient_scores(Some(-1)).into_iter().map(|(_, y, s)| (y, s)).unzip();
    println!("model: AUC {:.3}", auc(&l, &s)?);
    Ok(())
}
