//! Generate a reproducible synthetic cohort and write it in the standard layout.

use cadeval::io::{read_cohort, synth_cohort, write_synth, SynthSpec};
use cadeval::model::validate_cohort;

fn main() -> cadeval::Result<()> {
    let spec = SynthSpec {
        n_patients: 50,
        n_readers: 2,
        masks: true,
        seed: 42,
        ..Default::default()
    };
    let synth = synth_cohort(&spec)?;
    let c = &synth.cohort;
    println!(
        "{} patients, {} scans, {} nodules, {} detections, {} masks",
        c.patients.len(),
        c.scans.len(),
        c.gt_nodules.len(),
        c.detections.len(),
        synth.masks.len()
    );
    println!("valid: {}", validate_cohort(c).is_ok());

    let dir = std::env::temp_dir().join("cadeval-synth-example");
    let paths = write_synth(&dir, &synth)?;
    let (back, _) = read_cohort(&paths)?;
    println!("written to {} and read back identical: {}", dir.display(), &back == c);
    Ok(())
}
