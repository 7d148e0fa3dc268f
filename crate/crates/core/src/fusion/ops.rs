use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy of each Lung-RADS category on the screening population, with the
/// ambiguous categories spread uniformly across the included ones.
pub const LUNGRADS_TARGET_ACCURACIES: [(&str, f64); 6] = [
    ("1", 0.010499583),
    ("2", 0.565082253),
    ("3", 0.870543047),
    ("4A", 0.934665051),
    ("4B", 0.972519143),
    ("4X", 0.983397773),
];

/// Relative change that brings the highest nodule prediction onto the
/// patient prediction: `(final − max) / max`.
pub fn update_delta(patient_final: f64, nodule_preds: &[f64]) -> Result<f64> {
    let max = nodule_preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if nodule_preds.is_empty() {
        return Err(Error::Empty("no nodule prediction"));
    }
    if !(max > 0.0) {
        return Err(Error::invalid("highest nodule prediction must be positive"));
    }
    Ok((patient_final - max) / max)
}

/// Nodule predictions scaled by `1 + Δ`, before clamping.
pub fn update_nodule_predictions_unclamped(patient_final: f64, nodule_preds: &[f64]) -> Result<Vec<f64>> {
    let d = update_delta(patient_final, nodule_preds)?;
    Ok(nodule_preds.iter().map(|p| p + d * p).collect())
}

/// Nodule predictions updated from the patient prediction and clamped to
/// [0, 1]. The highest one becomes the patient prediction.
pub fn update_nodule_predictions(patient_final: f64, nodule_preds: &[f64]) -> Result<Vec<f64>> {
    Ok(update_nodule_predictions_unclamped(patient_final, nodule_preds)?
        .into_iter()
        .map(|p| p.clamp(0.0, 1.0))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalentOp {
    pub target_accuracy: f64,
    /// Scores at or above the cutoff are called positive.
    pub cutoff: f64,
    pub accuracy: f64,
    /// `|accuracy − target|`.
    pub deviation: f64,
}

/// Accuracy of `score ≥ cutoff` for every distinct score used as cutoff,
/// in ascending cutoff order.
pub fn accuracy_sweep(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let n = scores.len() as f64;
    // cutoff at the lowest score: everything positive
    let mut correct = labels.iter().filter(|&&l| l).count() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        out.push((s, correct / n));
        while i < order.len() && scores[order[i]] == s {
            correct += if labels[order[i]] { -1.0 } else { 1.0 };
            i += 1;
        }
    }
    Ok(out)
}

/// For each target accuracy, the cutoff whose empirical accuracy is closest.
/// Ties go to the lower cutoff.
pub fn lungrads_equivalent_ops(scores: &[f64], labels: &[bool], targets: &[f64]) -> Result<Vec<EquivalentOp>> {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass {
            positives,
            negatives: labels.len() - positives,
        });
    }
    let sweep = accuracy_sweep(scores, labels)?;
    Ok(targets
        .iter()
        .map(|&t| {
            let mut best = sweep[0];
            for &c in &sweep[1..] {
                if (c.1 - t).abs() < (best.1 - t).abs() {
                    best = c;
                }
            }
            EquivalentOp {
                target_accuracy: t,
                cutoff: best.0,
                accuracy: best.1,
                deviation: (best.1 - t).abs(),
            }
        })
        .collect())
}

/// Affine map sending the training minimum to 0 and maximum to 1; applied
/// values are clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitRescaler {
    pub min: f64,
    pub max: f64,
}

impl UnitRescaler {
    pub fn fit(train: &[f64]) -> Result<Self> {
        if train.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("rescaler needs finite values"));
        }
        let min = train.iter().copied().fold(f64::INFINITY, f64::min);
        let max = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(min < max) {
            return Err(Error::Degenerate("training predictions have no range".into()));
        }
        Ok(UnitRescaler { min, max })
    }

    pub fn apply(&self, x: f64) -> f64 {
        ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }

    pub fn apply_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }
}
