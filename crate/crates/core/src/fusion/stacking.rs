use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::auc;

pub const DIRICHLET_SAMPLES: usize = 10_000;
pub const INITIAL_STEP: f64 = 0.01;
pub const FINAL_STEP: f64 = 1e-5;

/// Convex weights over prediction classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingWeights {
    pub weights: Vec<f64>,
    pub labels: Vec<String>,
    /// Tuning AUC reached by the fit, absent for hand-written weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning_auc: Option<f64>,
}

impl StackingWeights {
    pub fn new(weights: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        let w = StackingWeights {
            weights,
            labels,
            tuning_auc: None,
        };
        w.check()?;
        Ok(w)
    }

    /// Weights of the nodule-level fusion of the 3D CNN, 2D CNN and XGBoost
    /// class means reported for the reference system. For illustration only.
    pub fn reference_nodule_level() -> Self {
        StackingWeights {
            weights: vec![0.9238, 0.0184, 0.0578],
            labels: ["mean_3d_cnn", "mean_2d_cnn", "mean_xgboost"]
                .map(String::from)
                .to_vec(),
            tuning_auc: None,
        }
    }

    /// Weights of the scan-level fusion of the nodule maximum and four
    /// full-volume models reported for the reference system.
    pub fn reference_scan_level() -> Self {
        StackingWeights {
            weights: vec![0.2489, 0.2310, 0.2141, 0.1636, 0.1424],
            labels: ["nodule_max", "full_ct_3", "full_ct_1", "full_ct_2", "full_ct_4"]
                .map(String::from)
                .to_vec(),
            tuning_auc: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.labels.len() {
            return Err(Error::invalid(
                "weights and labels must be non-empty and of equal length",
            ));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {s}, not 1")));
        }
        Ok(())
    }

    /// Weighted sum of one row of class predictions.
    pub fn combine(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.weights.len() {
            return Err(Error::invalid(format!(
                "row has {} values, expected {}",
                row.len(),
                self.weights.len()
            )));
        }
        Ok(row.iter().zip(&self.weights).map(|(p, w)| p * w).sum())
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.combine(r)).collect()
    }
}

/// Mean of each class of model columns. `groups[c]` lists the columns of
/// class `c`.
pub fn class_mean(predictions: &[Vec<f64>], groups: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    if let Some(c) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::invalid(format!("class {c} has no model")));
    }
    let n_models = predictions.first().map_or(0, Vec::len);
    let mut seen = vec![false; n_models];
    for &j in groups.iter().flatten() {
        if j >= n_models || std::mem::replace(&mut seen[j], true) {
            return Err(Error::invalid(format!("column {j} is out of range or in two classes")));
        }
    }
    predictions
        .iter()
        .map(|row| {
            if row.len() != n_models {
                return Err(Error::invalid("prediction rows differ in length"));
            }
            Ok(groups
                .iter()
                .map(|g| g.iter().map(|&j| row[j]).sum::<f64>() / g.len() as f64)
                .collect())
        })
        .collect()
}

fn blend(rows: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().zip(w).map(|(p, w)| p * w).sum()).collect()
}

fn objective(rows: &[Vec<f64>], labels: &[bool], w: &[f64]) -> f64 {
    auc(labels, &blend(rows, w)).expect("both classes checked up front")
}

/// Convex weights maximising the tuning AUC of the blended prediction.
///
/// The search visits the simplex vertices, then `DIRICHLET_SAMPLES` seeded
/// uniform draws, then refines the best point by moving weight between
/// pairs of classes with a step halved from 0.01 down to 1e-5. Only strict
/// improvements are kept, so ties resolve to the earliest candidate.
pub fn fit_stacking(class_preds: &[Vec<f64>], labels: &[bool], names: &[String], seed: u64) -> Result<StackingWeights> {
    let k = names.len();
    if k == 0 {
        return Err(Error::invalid("no prediction class"));
    }
    if class_preds.len() != labels.len() {
        return Err(Error::invalid("predictions and labels differ in length"));
    }
    if class_preds.iter().any(|r| r.len() != k) {
        return Err(Error::invalid(format!("every row needs {k} class predictions")));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass {
            positives,
            negatives: labels.len() - positives,
        });
    }

    let mut candidates: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    if k > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..DIRICHLET_SAMPLES {
            let e: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = e.iter().sum();
            candidates.push(e.into_iter().map(|x| x / s).collect());
        }
    }
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|w| objective(class_preds, labels, w))
        .collect();
    let mut best_i = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best_i] {
            best_i = i;
        }
    }
    let mut w = candidates.swap_remove(best_i);
    let mut best = scores[best_i];

    let mut step = INITIAL_STEP;
    while k > 1 && step >= FINAL_STEP {
        let mut improved = true;
        while improved {
            improved = false;
            for to in 0..k {
                for from in 0..k {
                    if to == from || w[from] <= 0.0 {
                        continue;
                    }
                    let delta = step.min(w[from]);
                    let mut trial = w.clone();
                    trial[to] += delta;
                    trial[from] -= delta;
                    let s = objective(class_preds, labels, &trial);
                    if s > best {
                        best = s;
                        w = trial;
                        improved = true;
                    }
                }
            }
        }
        step *= 0.5;
    }

    // exact renormalisation keeps the simplex constraint under rounding
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x = (*x / s).max(0.0));
    let out = StackingWeights {
        weights: w,
        labels: names.to_vec(),
        tuning_auc: Some(best),
    };
    out.check()?;
    Ok(out)
}
