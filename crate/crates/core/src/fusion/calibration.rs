use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CALIBRATION_EPSILON: f64 = 1e-6;
pub const MAX_SLOPE: f64 = 50.0;
const MAX_ITER: usize = 200;
const TOLERANCE: f64 = 1e-10;

/// Logistic calibration `p ↦ σ(a·logit(clamp(p)) + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            a: 1.0,
            b: 0.0,
            epsilon: CALIBRATION_EPSILON,
        }
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl CalibrationParams {
    pub fn apply(&self, p: f64) -> f64 {
        let p = p.clamp(self.epsilon, 1.0 - self.epsilon);
        sigmoid(self.a * logit(p) + self.b)
    }

    pub fn apply_all(&self, ps: &[f64]) -> Vec<f64> {
        ps.iter().map(|&p| self.apply(p)).collect()
    }
}

/// Mean negative log-likelihood of labels under probabilities `ps`, with
/// probabilities clamped to `[ε, 1 − ε]`.
pub fn nll(ps: &[f64], labels: &[bool]) -> f64 {
    let e = CALIBRATION_EPSILON;
    ps.iter()
        .zip(labels)
        .map(|(&p, &l)| {
            let p = p.clamp(e, 1.0 - e);
            if l {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / ps.len() as f64
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Total negative log-likelihood of `σ(a·x + b)`.
fn loss(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| log1p_exp(a * x + b) - y * (a * x + b))
        .sum()
}

/// Fit the logistic calibration by damped Newton iterations on the
/// log-likelihood. With `temperature_only` the intercept stays at 0.
///
/// The slope is capped at ±50; hitting the cap (as under perfect
/// separation) is logged as a warning.
pub fn fit_calibration(scores: &[f64], labels: &[bool], temperature_only: bool) -> Result<CalibrationParams> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass {
            positives,
            negatives: labels.len() - positives,
        });
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::invalid(format!("score {s} outside [0, 1]")));
    }
    let eps = CALIBRATION_EPSILON;
    let xs: Vec<f64> = scores.iter().map(|&p| logit(p.clamp(eps, 1.0 - eps))).collect();
    let ys: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();

    let (mut a, mut b) = (1.0, 0.0);
    let mut current = loss(&xs, &ys, a, b);
    let mut capped = false;
    for _ in 0..MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let p = sigmoid(a * x + b);
            let r = p - y;
            let w = p * (1.0 - p);
            ga += r * x;
            gb += r;
            haa += w * x * x;
            hab += w * x;
            hbb += w;
        }
        let det = haa * hbb - hab * hab;
        let (mut da, mut db) = if temperature_only {
            (if haa > 0.0 { ga / haa } else { 0.0 }, 0.0)
        } else if det > 1e-12 * haa * hbb && det.is_finite() {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            // singular curvature: step each parameter on its own
            (
                if haa > 0.0 { ga / haa } else { 0.0 },
                if hbb > 0.0 { gb / hbb } else { 0.0 },
            )
        };

        // halve the step until the loss does not increase
        let mut accepted = false;
        for _ in 0..60 {
            let na = (a - da).clamp(-MAX_SLOPE, MAX_SLOPE);
            let nb = b - db;
            let l = loss(&xs, &ys, na, nb);
            if l <= current + 1e-12 * current.abs().max(1.0) {
                capped = na.abs() == MAX_SLOPE;
                let moved = (na - a).abs().max((nb - b).abs());
                a = na;
                b = nb;
                current = l;
                accepted = moved >= TOLERANCE;
                break;
            }
            da *= 0.5;
            db *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if capped {
        log::warn!("calibration slope reached the cap |a| = {MAX_SLOPE}; scores look perfectly separated");
    }
    Ok(CalibrationParams { a, b, epsilon: eps })
}
