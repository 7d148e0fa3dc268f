//! Longitudinal size and prediction-evolution measures, and the NELSON and
//! Lung-RADS growth categories.
//!
//! Suffix `2` is the prior scan (T−2), suffix `1` the latest (T−1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::LinkedPair;

pub const DAYS_PER_YEAR: f64 = 365.0;
pub const DARCY_EPSILON: f64 = 1e-6;
/// Lung-RADS diameter growth threshold in mm, inclusive.
pub const LUNGRADS_GROWTH_MM: f64 = 1.5;
/// NELSON indeterminate volume range in mm³, inclusive.
pub const NODCAT_III_RANGE: (f64, f64) = (50.0, 500.0);
/// NELSON selection: minimum volume growth in percent.
pub const NELSON_MIN_GROWTH: f64 = 25.0;
pub const GROWCAT_A_DAYS: f64 = 600.0;
pub const GROWCAT_B_DAYS: f64 = 400.0;

/// Volume doubling time in days by the Schwartz formula
/// `(t1 − t2)·ln 2 / ln(v1 / v2)`.
///
/// Equal volumes give `+inf`; shrinking nodules give a negative value.
pub fn vdt(v2: f64, v1: f64, t2: f64, t1: f64) -> Result<f64> {
    if !(v2 > 0.0 && v1 > 0.0 && v2.is_finite() && v1.is_finite()) {
        return Err(Error::invalid(format!("volumes must be positive, got {v2} and {v1}")));
    }
    if !(t1 > t2) {
        return Err(Error::invalid(format!("latest day {t1} is not after prior day {t2}")));
    }
    if v1 == v2 {
        return Ok(f64::INFINITY);
    }
    Ok((t1 - t2) * std::f64::consts::LN_2 / (v1 / v2).ln())
}

/// Reciprocal doubling time, doublings per year. Infinite VDT gives 0.
pub fn rdt(vdt_days: f64) -> Result<f64> {
    if vdt_days.is_infinite() {
        return Ok(0.0);
    }
    if vdt_days == 0.0 || vdt_days.is_nan() {
        return Err(Error::invalid(format!("vdt {vdt_days} has no reciprocal")));
    }
    Ok(DAYS_PER_YEAR / vdt_days)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthDenominator {
    /// `100·(V1 − V2)/V1`, as printed in the reference formula.
    #[default]
    Latest,
    /// `100·(V1 − V2)/V2`, the usual percent change.
    Prior,
}

impl std::str::FromStr for GrowthDenominator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "latest" => Ok(GrowthDenominator::Latest),
            "prior" => Ok(GrowthDenominator::Prior),
            _ => Err(format!("denominator must be latest or prior, got `{s}`")),
        }
    }
}

/// Volume growth in percent, `100·(V1 − V2)/V1`.
pub fn volume_growth(v2: f64, v1: f64) -> Result<f64> {
    volume_growth_with(v2, v1, GrowthDenominator::Latest)
}

pub fn volume_growth_with(v2: f64, v1: f64, denominator: GrowthDenominator) -> Result<f64> {
    let d = match denominator {
        GrowthDenominator::Latest => v1,
        GrowthDenominator::Prior => v2,
    };
    if d == 0.0 {
        return Err(Error::invalid("volume growth denominator is zero"));
    }
    Ok(100.0 * (v1 - v2) / d)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeNormalization {
    /// Raw differences between the two scans.
    #[default]
    Raw,
    /// Volume difference scaled by `365 / elapsed days`.
    Annualized,
}

impl std::str::FromStr for TimeNormalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(TimeNormalization::Raw),
            "annualized" => Ok(TimeNormalization::Annualized),
            _ => Err(format!("normalization must be raw or annualized, got `{s}`")),
        }
    }
}

/// Volume difference annualised over the elapsed interval,
/// `365·(V1 − V2)/(t1 − t2)`.
pub fn annualized_delta_volume(v2: f64, v1: f64, elapsed_days: f64) -> f64 {
    DAYS_PER_YEAR * (v1 - v2) / elapsed_days
}

/// (ΔV, ΔD) of a linked pair; `None` where a size is missing at either scan.
pub fn delta_measures(pair: &LinkedPair, norm: TimeNormalization) -> (Option<f64>, Option<f64>) {
    let dv = pair.volume_2.zip(pair.volume_1).map(|(v2, v1)| v1 - v2);
    let dv = match norm {
        TimeNormalization::Raw => dv,
        TimeNormalization::Annualized => pair
            .volume_2
            .zip(pair.volume_1)
            .map(|(v2, v1)| annualized_delta_volume(v2, v1, pair.elapsed_days() as f64)),
    };
    let dd = pair.diameter_2.zip(pair.diameter_1).map(|(d2, d1)| d1 - d2);
    (dv, dd)
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// `(VDT − median VDT)²` for every value.
pub fn vdt_median_centered(vdts: &[f64]) -> Result<Vec<f64>> {
    if vdts.is_empty() {
        return Err(Error::Empty("no vdt"));
    }
    if vdts.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("median centering needs finite vdt values"));
    }
    let m = median(vdts);
    Ok(vdts.iter().map(|v| (v - m).powi(2)).collect())
}

/// D'Arcy Thompson growth without the logarithm: `P1 / δ` where the deltas
/// `P1 − P2` are min-max normalised across the cohort onto `[ε, 1]`.
/// When all deltas are equal every normalised delta is 1.
pub fn darcy_growth(p2: &[f64], p1: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if p2.len() != p1.len() {
        return Err(Error::invalid("prediction lists differ in length"));
    }
    if p1.len() < 2 {
        return Err(Error::invalid("d'arcy growth needs at least two nodules"));
    }
    let deltas: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| a - b).collect();
    let lo = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(deltas
        .iter()
        .zip(p1)
        .map(|(&d, &p)| {
            let norm = if hi > lo {
                (epsilon + (1.0 - epsilon) * (d - lo) / (hi - lo)).max(epsilon)
            } else {
                1.0
            };
            p / norm
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nodcat {
    Small,
    /// Indeterminate, 50 to 500 mm³.
    III,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Growcat {
    A,
    B,
    C,
}

pub fn nodcat(v2: f64) -> Nodcat {
    if v2 < NODCAT_III_RANGE.0 {
        Nodcat::Small
    } else if v2 <= NODCAT_III_RANGE.1 {
        Nodcat::III
    } else {
        Nodcat::Large
    }
}

/// Growth category from VDT; negative or infinite VDT counts as non-growing.
pub fn growcat(vdt_days: f64) -> Growcat {
    if vdt_days.is_finite() && vdt_days > 0.0 && vdt_days < GROWCAT_B_DAYS {
        Growcat::C
    } else if vdt_days.is_finite() && vdt_days > 0.0 && vdt_days < GROWCAT_A_DAYS {
        Growcat::B
    } else {
        Growcat::A
    }
}

pub fn nelson_categorize(v2: f64, vdt_days: f64) -> (Nodcat, Growcat) {
    (nodcat(v2), growcat(vdt_days))
}

pub fn lungrads_growth_flag(delta_diameter_mm: f64) -> bool {
    delta_diameter_mm >= LUNGRADS_GROWTH_MM
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GrowthOptions {
    pub denominator: GrowthDenominator,
    pub normalization: TimeNormalization,
    pub darcy_epsilon: f64,
}

impl GrowthOptions {
    pub fn new() -> Self {
        GrowthOptions {
            darcy_epsilon: DARCY_EPSILON,
            ..Default::default()
        }
    }
}

/// Every size and prediction-evolution measure of one linked nodule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub linked: LinkedPair,
    pub vdt: f64,
    pub rdt: f64,
    pub volume_growth: f64,
    pub delta_volume: f64,
    pub delta_diameter: Option<f64>,
    pub darcy: f64,
    /// `None` for infinite VDT, which is excluded from the centering.
    pub vdt_centered: Option<f64>,
    pub nodcat: Nodcat,
    pub growcat: Growcat,
    pub lungrads_growth: Option<bool>,
}

/// Growth records of all pairs with volumes at both scans. Pairs without
/// both volumes are skipped. Cohort-level measures (D'Arcy normalisation,
/// VDT median) are computed over the returned records.
pub fn growth_records(pairs: &[LinkedPair], opts: &GrowthOptions) -> Result<Vec<GrowthRecord>> {
    let usable: Vec<&LinkedPair> = pairs
        .iter()
        .filter(|p| p.volume_2.is_some() && p.volume_1.is_some())
        .collect();
    if usable.is_empty() {
        return Err(Error::Empty("no linked pair with volumes at both timepoints"));
    }
    let p2: Vec<f64> = usable.iter().map(|p| p.prediction_2).collect();
    let p1: Vec<f64> = usable.iter().map(|p| p.prediction_1).collect();
    let darcy = if usable.len() >= 2 {
        darcy_growth(&p2, &p1, opts.darcy_epsilon)?
    } else {
        p1.clone()
    };

    let mut out = Vec::with_capacity(usable.len());
    for (pair, darcy) in usable.into_iter().zip(darcy) {
        let (v2, v1) = (pair.volume_2.unwrap(), pair.volume_1.unwrap());
        let vdt = vdt(v2, v1, pair.day_2 as f64, pair.day_1 as f64)?;
        let (dv, dd) = delta_measures(pair, opts.normalization);
        out.push(GrowthRecord {
            linked: pair.clone(),
            vdt,
            rdt: rdt(vdt)?,
            volume_growth: volume_growth_with(v2, v1, opts.denominator)?,
            delta_volume: dv.unwrap_or(f64::NAN),
            delta_diameter: dd,
            darcy,
            vdt_centered: None,
            nodcat: nodcat(v2),
            growcat: growcat(vdt),
            lungrads_growth: dd.map(lungrads_growth_flag),
        });
    }
    let finite: Vec<f64> = out.iter().map(|r| r.vdt).filter(|v| v.is_finite()).collect();
    if !finite.is_empty() {
        let centered = vdt_median_centered(&finite)?;
        let mut it = centered.into_iter();
        for r in out.iter_mut().filter(|r| r.vdt.is_finite()) {
            r.vdt_centered = it.next();
        }
    }
    Ok(out)
}

/// NELSON follow-up selection: records with NODCAT III at T−2 and volume
/// growth of at least 25% under the growth denominator used to build them.
pub fn nelson_protocol_select(records: &[GrowthRecord]) -> Vec<&GrowthRecord> {
    records
        .iter()
        .filter(|r| r.nodcat == Nodcat::III && r.volume_growth >= NELSON_MIN_GROWTH)
        .collect()
}
