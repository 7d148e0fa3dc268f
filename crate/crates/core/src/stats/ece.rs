use crate::error::{Error, Result};

pub const DEFAULT_ECE_BINS: usize = 10;

/// Expected calibration error over `n_bins` equal-width bins on [0, 1]:
/// the count-weighted mean gap between mean score and positive fraction.
/// A score of exactly 1 falls in the last bin.
pub fn ece(scores: &[f64], labels: &[bool], n_bins: usize) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if n_bins == 0 {
        return Err(Error::invalid("ece needs at least one bin"));
    }
    if scores.is_empty() {
        return Err(Error::Empty("no score"));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::invalid(format!("score {s} outside [0, 1]")));
    }
    let mut count = vec![0usize; n_bins];
    let mut sum = vec![0.0; n_bins];
    let mut pos = vec![0usize; n_bins];
    for (&s, &l) in scores.iter().zip(labels) {
        let b = ((s * n_bins as f64) as usize).min(n_bins - 1);
        count[b] += 1;
        sum[b] += s;
        pos[b] += l as usize;
    }
    let n = scores.len() as f64;
    Ok((0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n) * (sum[b] / c - pos[b] as f64 / c).abs()
        })
        .sum())
}
