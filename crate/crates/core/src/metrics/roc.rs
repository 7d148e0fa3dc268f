//! Nonparametric ROC: cutoffs at the unique scores, `score >= cutoff`
//! classifies as positive, tied scores move together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Higher scores mean positive.
    #[default]
    AsIs,
    /// Flip the score direction when that raises the AUC above 0.5.
    Auto,
}

impl std::str::FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as_is" | "as-is" => Ok(Orientation::AsIs),
            "auto" => Ok(Orientation::Auto),
            _ => Err(format!("orientation must be `as_is` or `auto`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub cutoff: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub youden_j: f64,
}

impl OperatingPoint {
    fn from_counts(cutoff: f64, tp: u64, fp: u64, p: u64, n: u64) -> Self {
        let sensitivity = tp as f64 / p as f64;
        let specificity = (n - fp) as f64 / n as f64;
        OperatingPoint {
            cutoff,
            sensitivity,
            specificity,
            accuracy: (tp + n - fp) as f64 / (p + n) as f64,
            youden_j: sensitivity + specificity - 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Starts at (0, 0) with an infinite cutoff and ends at (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
    /// Maximum Youden index operating point.
    pub myi: OperatingPoint,
    /// True when `Orientation::Auto` reversed the scores. Cutoffs are then
    /// reported on the original scale with `score <= cutoff` as positive.
    pub flipped: bool,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Tie groups in descending score order: (score, positives, negatives).
fn groups(labels: &[bool], scores: &[f64]) -> Vec<(f64, u64, u64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out: Vec<(f64, u64, u64)> = Vec::new();
    for i in idx {
        let (p, n) = if labels[i] { (1, 0) } else { (0, 1) };
        match out.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += p;
                g.2 += n;
            }
            _ => out.push((scores[i], p, n)),
        }
    }
    out
}

/// Twice the trapezoid area times P·N, exactly, from tie groups.
fn area_numerator(groups: impl Iterator<Item = (u64, u64)>) -> u128 {
    let (mut tp, mut fp) = (0u128, 0u128);
    let mut twice = 0u128;
    for (p, n) in groups {
        let (tp2, fp2) = (tp + p as u128, fp + n as u128);
        twice += (fp2 - fp) * (tp + tp2);
        tp = tp2;
        fp = fp2;
    }
    twice
}

fn check_inputs(labels: &[bool], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let p = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass {
            positives: p,
            negatives: n,
        });
    }
    Ok((p, n))
}

/// Area under the ROC curve by the trapezoid rule.
pub fn auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    let (p, n) = check_inputs(labels, scores)?;
    let twice = area_numerator(groups(labels, scores).into_iter().map(|g| (g.1, g.2)));
    Ok(twice as f64 / (2 * p as u128 * n as u128) as f64)
}

fn curve(labels: &[bool], scores: &[f64], p: usize, n: usize) -> RocCurve {
    let gs = groups(labels, scores);
    let (pu, nu) = (p as u64, n as u64);
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        cutoff: f64::INFINITY,
    }];
    let mut myi = OperatingPoint::from_counts(f64::INFINITY, 0, 0, pu, nu);
    let mut best = (0i128, 0u64); // (tp·N − fp·P, fp)
    let (mut tp, mut fp) = (0u64, 0u64);
    for &(s, gp, gn) in &gs {
        tp += gp;
        fp += gn;
        points.push(RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            cutoff: s,
        });
        // J comparison in integers; ties keep the lower fp (higher specificity)
        let j = tp as i128 * nu as i128 - fp as i128 * pu as i128;
        if j > best.0 || (j == best.0 && fp < best.1) {
            best = (j, fp);
            myi = OperatingPoint::from_counts(s, tp, fp, pu, nu);
        }
    }
    let twice = area_numerator(gs.iter().map(|g| (g.1, g.2)));
    RocCurve {
        points,
        auc: twice as f64 / (2 * p as u128 * n as u128) as f64,
        myi,
        flipped: false,
        n_positive: p,
        n_negative: n,
    }
}

/// Full ROC curve with AUC and the maximum-Youden operating point.
pub fn roc(labels: &[bool], scores: &[f64], orientation: Orientation) -> Result<RocCurve> {
    let (p, n) = check_inputs(labels, scores)?;
    let c = curve(labels, scores, p, n);
    if orientation == Orientation::AsIs || c.auc >= 0.5 {
        return Ok(c);
    }
    let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
    let mut f = curve(labels, &neg, p, n);
    for pt in &mut f.points {
        pt.cutoff = -pt.cutoff;
    }
    f.myi.cutoff = -f.myi.cutoff;
    f.flipped = true;
    Ok(f)
}

/// Scores sorted once so that AUC under integer case weights (bootstrap
/// multiplicities) costs one linear pass.
#[derive(Debug, Clone)]
pub struct RankedScores {
    /// Record indices in descending score order.
    order: Vec<usize>,
    /// `group_end[k]` is one past the last position of tie group `k`.
    group_end: Vec<usize>,
    labels: Vec<bool>,
}

impl RankedScores {
    pub fn new(labels: &[bool], scores: &[f64]) -> Result<Self> {
        if labels.len() != scores.len() {
            return Err(Error::invalid("labels and scores differ in length"));
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let mut group_end = Vec::new();
        for k in 1..=order.len() {
            if k == order.len() || scores[order[k]] != scores[order[k - 1]] {
                group_end.push(k);
            }
        }
        Ok(RankedScores {
            order,
            group_end,
            labels: labels.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// AUC with record `i` counted `weights[i]` times; `None` when a class
    /// has zero total weight.
    pub fn weighted_auc(&self, weights: &[u32]) -> Option<f64> {
        let mut start = 0;
        let mut twice = 0u128;
        let (mut tp, mut fp) = (0u128, 0u128);
        for &end in &self.group_end {
            let (mut gp, mut gn) = (0u128, 0u128);
            for &i in &self.order[start..end] {
                let w = weights[i] as u128;
                if self.labels[i] {
                    gp += w;
                } else {
                    gn += w;
                }
            }
            twice += gn * (2 * tp + gp);
            tp += gp;
            fp += gn;
            start = end;
        }
        (tp > 0 && fp > 0).then(|| twice as f64 / (2 * tp * fp) as f64)
    }
}
