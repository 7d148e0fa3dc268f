//! Stacking of model classes, nodule updates and Lung-RADS equivalent cutoffs.

use cadeval::fusion::{fit_stacking, lungrads_equivalent_ops, update_nodule_predictions, LUNGRADS_TARGET_ACCURACIES};
use cadeval::metrics::auc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cadeval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let labels: Vec<bool> = (0..300).map(|i| i % 5 == 0).collect();
    let noise = [0.5, 0.8, 1.2];
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| {
            noise
                .iter()
                .map(|s| 1.0 / (1.0 + (-(y as u8 as f64 * 2.0 - 1.0 + s * rng.gen_range(-2.0..2.0))).exp()))
                .collect()
        })
        .collect();
    let names: Vec<String> = ["3d", "2d", "xgb"].iter().map(|s| s.to_string()).collect();
    let w = fit_stacking(&rows, &labels, &names, 1)?;
    for (n, x) in names.iter().zip(&w.weights) {
        println!("weight {n:>4}: {x:.3}");
    }
    let blended = w.apply(&rows)?;
    println!("stacked tuning AUC {:.4}", auc(&labels, &blended)?);

    let updated = update_nodule_predictions(0.8, &[0.6, 0.3, 0.1])?;
    println!("nodule predictions after a patient score of 0.8: {updated:.3?}");

    let targets: Vec<f64> = LUNGRADS_TARGET_ACCURACIES.iter().map(|t| t.1).collect();
    for (op, (cat, _)) in lungrads_equivalent_ops(&blended, &labels, &targets)?
        .iter()
        .zip(LUNGRADS_TARGET_ACCURACIES)
    {
        println!(
            "Lung-RADS {cat:>2}: cutoff {:.3}, accuracy {:.3} (target {:.3})",
            op.cutoff, op.accuracy, op.target_accuracy
        );
    }
    Ok(())
}
