//! Logistic calibration of a distorted score and its effect on ECE and NLL.

use cadeval::fusion::{fit_calibration, nll};
use cadeval::stats::{ece, DEFAULT_ECE_BINS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cadeval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (scores, labels): (Vec<f64>, Vec<bool>) = (0..10_000)
        .map(|_| {
            let p: f64 = rng.gen();
            (p.powi(3), rng.gen::<f64>() < p)
        })
        .unzip();
    let fit = fit_calibration(&scores, &labels, false)?;
    let out = fit.apply_all(&scores);
    println!("fitted a {:.3}, b {:.3}", fit.a, fit.b);
    println!(
        "ECE {:.4} -> {:.4}",
        ece(&scores, &labels, DEFAULT_ECE_BINS)?,
        ece(&out, &labels, DEFAULT_ECE_BINS)?
    );
    println!("NLL {:.4} -> {:.4}", nll(&scores, &labels), nll(&out, &labels));
    Ok(())
}
