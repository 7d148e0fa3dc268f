//! Superiority test of one model over another on shared bootstrap resamples.

use cadeval::metrics::RankedScores;
use cadeval::stats::{bootstrap_many, welch_one_sided, BootstrapConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cadeval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels: Vec<bool> = (0..400).map(|i| i % 4 == 0).collect();
    let strong: Vec<f64> = labels
        .iter()
        .map(|&y| y as u8 as f64 * 0.9 + rng.gen::<f64>())
        .collect();
    let weak: Vec<f64> = labels
        .iter()
        .map(|&y| y as u8 as f64 * 0.4 + rng.gen::<f64>())
        .collect();
    let (a, b) = (RankedScores::new(&labels, &strong)?, RankedScores::new(&labels, &weak)?);

    let cfg = BootstrapConfig::new(2000, 11);
    let res = bootstrap_many(labels.len(), 2, &cfg, |w| {
        Some(vec![a.weighted_auc(w)?, b.weighted_auc(w)?])
    })?;
    for (name, r) in ["strong", "weak"].iter().zip(&res) {
        println!(
            "{name}: AUC {:.3}, 95% CI [{:.3}, {:.3}]",
            r.estimate, r.ci95.0, r.ci95.1
        );
    }
    let w = welch_one_sided(&res[0].replicates, &res[1].replicates)?;
    println!("Welch t {:.2}, df {:.1}, one-sided p {:.3e}", w.t, w.df, w.p_value);
    Ok(())
}
