//! ROC curve, AUC, maximum-Youden operating point and a bootstrap CI.

use cadeval::metrics::{roc, Orientation, RankedScores};
use cadeval::stats::{bootstrap, BootstrapConfig};

fn main() -> cadeval::Result<()> {
    let labels = [true, true, true, false, false, false, false, true, false, false];
    let scores = [0.91, 0.78, 0.40, 0.62, 0.12, 0.33, 0.40, 0.85, 0.05, 0.27];

    let curve = roc(&labels, &scores, Orientation::AsIs)?;
    println!("AUC {:.4}", curve.auc);
    let op = curve.myi;
    println!(
        "MYI cutoff {:.2}: sensitivity {:.3}, specificity {:.3}, J {:.3}",
        op.cutoff, op.sensitivity, op.specificity, op.youden_j
    );

    let ranked = RankedScores::new(&labels, &scores)?;
    let b = bootstrap(labels.len(), &BootstrapConfig::new(5000, 1), |w| ranked.weighted_auc(w))?;
    println!(
        "bootstrap 95% CI [{:.3}, {:.3}] over {} replicates",
        b.ci95.0, b.ci95.1, b.n_boot
    );
    Ok(())
}
