use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    /// One-sided p-value for `mean(a) > mean(b)`.
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom, from
/// the regularized incomplete beta function:
/// `P(T > t) = I_x(df/2, 1/2) / 2` with `x = df / (df + t²)` for `t ≥ 0`.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_nan() || df.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let x = df / (df + t * t);
    let upper = 0.5 * beta_reg(0.5 * df, 0.5, x);
    if t >= 0.0 {
        upper
    } else {
        1.0 - upper
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// One-sided Welch t-test of `mean(a) > mean(b)`.
///
/// With zero variance in both samples the statistic is undefined: equal
/// means give p = 0.5, otherwise p is 0 or 1 by the sign of the difference.
pub fn welch_one_sided(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("welch test needs at least two values per sample"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::invalid("welch test needs finite values"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let p = if ma == mb {
            0.5
        } else if ma > mb {
            0.0
        } else {
            1.0
        };
        let t = if ma == mb {
            0.0
        } else {
            (ma - mb).signum() * f64::INFINITY
        };
        return Ok(WelchResult {
            t,
            df: f64::INFINITY,
            p_value: p,
            mean_a: ma,
            mean_b: mb,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    Ok(WelchResult {
        t,
        df,
        p_value: student_t_sf(t, df),
        mean_a: ma,
        mean_b: mb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `P(T > t)` by quadrature: with `x = √df·tan θ` the density becomes
    /// `cos^(df−1) θ`, integrated by composite Simpson over θ.
    fn oracle_sf(t: f64, df: f64) -> f64 {
        let f = |th: f64| th.cos().powf(df - 1.0);
        let simpson = |a: f64, b: f64, n: usize| {
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let half = std::f64::consts::FRAC_PI_2;
        let th = (t / df.sqrt()).atan();
        simpson(th, half, 200_000) / simpson(-half, half, 200_000)
    }

    #[test]
    fn identical_samples_give_one_half() {
        let a = [1.0, 2.0, 3.5, 0.2];
        let r = welch_one_sided(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_value, 0.5);
        let flat = [0.8; 5];
        assert_eq!(welch_one_sided(&flat, &flat).unwrap().p_value, 0.5);
    }

    #[test]
    fn extreme_separation() {
        let b: Vec<f64> = (0..20).map(|i| 0.5 + 1e-3 * (i as f64).sin()).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 10.0).collect();
        assert!(welch_one_sided(&a, &b).unwrap().p_value < 1e-4);
    }

    #[test]
    fn thirty_sample_fixture_matches_quadrature() {
        let a: Vec<f64> = (0..30)
            .map(|i| 0.80 + 0.02 * ((i * 7 % 11) as f64 / 11.0 - 0.5))
            .collect();
        let b: Vec<f64> = (0..30)
            .map(|i| 0.795 + 0.03 * ((i * 5 % 13) as f64 / 13.0 - 0.5))
            .collect();
        let r = welch_one_sided(&a, &b).unwrap();
        let want = oracle_sf(r.t, r.df);
        assert!((r.p_value - want).abs() < 1e-9, "{} vs {want}", r.p_value);
        assert!(r.p_value > 0.0 && r.p_value < 0.5);
    }

    #[test]
    fn sf_against_quadrature_over_a_grid() {
        for &df in &[3.0, 7.5, 29.0, 58.3] {
            for &t in &[-2.5, -0.3, 0.0, 0.7, 1.9, 4.0] {
                assert!((student_t_sf(t, df) - oracle_sf(t, df)).abs() < 1e-9, "t={t} df={df}");
            }
        }
    }

    proptest! {
        #[test]
        fn swapping_samples_complements_p(
            a in prop::collection::vec(-5.0f64..5.0, 2..30),
            b in prop::collection::vec(-5.0f64..5.0, 2..30),
        ) {
            let ab = welch_one_sided(&a, &b).unwrap().p_value;
            let ba = welch_one_sided(&b, &a).unwrap().p_value;
            prop_assert!((ab + ba - 1.0).abs() < 1e-12);
        }
    }
}
