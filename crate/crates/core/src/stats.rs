//! Chi-square distribution and test, least-squares trend lines and Pearson
//! correlation.

use thiserror::Error;

use crate::model::RankTable;

const MAX_ITER: usize = 10_000;
const REL_EPS: f64 = 1e-15;
const FPMIN: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("expected frequency {value} at position {index} is not positive")]
    NonPositiveExpected { index: usize, value: f64 },
    #[error("observed frequency {value} at position {index} is negative")]
    NegativeObserved { index: usize, value: f64 },
    #[error("non-finite input at position {0}")]
    NonFinite(usize),
    #[error("significance level {0} outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("degrees of freedom must be positive")]
    InvalidDegreesOfFreedom,
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("all abscissae are equal")]
    DegenerateAbscissa,
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("the two rank tables share fewer than two countries")]
    NoCommonCountries,
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Lower regularized gamma P(a, x) by its power series; use for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> Result<f64, StatsError> {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * REL_EPS {
            return Ok(sum * (a * x.ln() - x - ln_gamma(a)).exp());
        }
    }
    Err(StatsError::NoConvergence("incomplete gamma series"))
}

/// Upper regularized gamma Q(a, x) by modified Lentz continued fraction;
/// use for x >= a + 1.
fn gamma_q_continued_fraction(a: f64, x: f64) -> Result<f64, StatsError> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < REL_EPS {
            return Ok((a * x.ln() - x - ln_gamma(a)).exp() * h);
        }
    }
    Err(StatsError::NoConvergence(
        "incomplete gamma continued fraction",
    ))
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> Result<f64, StatsError> {
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok((1.0 - gamma_p_series(a, x)?).clamp(0.0, 1.0))
    } else {
        Ok(gamma_q_continued_fraction(a, x)?.clamp(0.0, 1.0))
    }
}

/// P(X > x) for X ~ chi-square with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: u32) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::InvalidDegreesOfFreedom);
    }
    if x.is_nan() {
        return Err(StatsError::NonFinite(0));
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

pub fn chi_square_pdf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return match df {
            1 => f64::INFINITY,
            2 => 0.5,
            _ => 0.0,
        };
    }
    let k = df as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Critical value: the `x` with `chi_square_sf(x, df) == alpha`.
///
/// Brackets the root by doubling, then runs Newton steps that fall back to
/// bisection whenever a step would leave the bracket.
pub fn chi_square_isf(alpha: f64, df: u32) -> Result<f64, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    if df == 0 {
        return Err(StatsError::InvalidDegreesOfFreedom);
    }
    let mut lo = 0.0;
    let mut hi = (df as f64).max(1.0);
    while chi_square_sf(hi, df)? > alpha {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..500 {
        let f = chi_square_sf(x, df)? - alpha;
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x + f / chi_square_pdf(x, df);
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(1.0) || hi - lo <= f64::EPSILON * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(StatsError::NoConvergence("chi-square quantile"))
}

/// Pearson's statistic: sum of (observed - expected)^2 / expected.
pub fn chi_square_statistic(observed: &[f64], expected: &[f64]) -> Result<f64, StatsError> {
    if observed.len() != expected.len() {
        return Err(StatsError::LengthMismatch {
            left: observed.len(),
            right: expected.len(),
        });
    }
    if observed.len() < 2 {
        return Err(StatsError::TooFewPoints {
            needed: 2,
            got: observed.len(),
        });
    }
    let mut stat = 0.0;
    for (i, (&o, &e)) in observed.iter().zip(expected).enumerate() {
        if !o.is_finite() || !e.is_finite() {
            return Err(StatsError::NonFinite(i));
        }
        if o < 0.0 {
            return Err(StatsError::NegativeObserved { index: i, value: o });
        }
        if e <= 0.0 {
            return Err(StatsError::NonPositiveExpected { index: i, value: e });
        }
        stat += (o - e).powi(2) / e;
    }
    Ok(stat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Reject,
    DoNotReject,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Reject => "reject",
            Decision::DoNotReject => "do-not-reject",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub decision: Decision,
}

/// Completes a chi-square test from its statistic.
pub fn chi_square_test(statistic: f64, df: u32, alpha: f64) -> Result<ChiSquareResult, StatsError> {
    let critical_value = chi_square_isf(alpha, df)?;
    let p_value = chi_square_sf(statistic, df)?;
    let decision = if statistic > critical_value {
        Decision::Reject
    } else {
        Decision::DoNotReject
    };
    Ok(ChiSquareResult {
        statistic,
        df,
        p_value,
        critical_value,
        alpha,
        decision,
    })
}

/// Tests whether the current ranking departs from the previous one, with
/// current ranks as observed and previous ranks as expected frequencies over
/// the countries ranked in both years (df = n - 1).
pub fn rank_homogeneity_test(
    prev: &RankTable,
    cur: &RankTable,
    alpha: f64,
) -> Result<ChiSquareResult, StatsError> {
    let before = prev.as_map();
    let (observed, expected): (Vec<f64>, Vec<f64>) = cur
        .as_map()
        .into_iter()
        .filter_map(|(c, now)| before.get(c).map(|then| (now as f64, *then as f64)))
        .unzip();
    if observed.len() < 2 {
        return Err(StatsError::NoCommonCountries);
    }
    let statistic = chi_square_statistic(&observed, &expected)?;
    chi_square_test(statistic, observed.len() as u32 - 1, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendResult {
    /// Units per year.
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

impl TrendResult {
    pub fn predict(&self, year: f64) -> f64 {
        self.intercept + self.slope * year
    }
}

/// Least-squares line through (year, value) points.
pub fn ols_fit(series: &[(i32, f64)]) -> Result<TrendResult, StatsError> {
    let n = series.len();
    if n < 2 {
        return Err(StatsError::TooFewPoints { needed: 2, got: n });
    }
    if let Some(i) = series.iter().position(|(_, v)| !v.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let nf = n as f64;
    let mean_x = series.iter().map(|(x, _)| *x as f64).sum::<f64>() / nf;
    let mean_y = series.iter().map(|(_, y)| *y).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in series {
        let dx = x as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    Ok(TrendResult {
        slope,
        intercept: mean_y - slope * mean_x,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFewPoints { needed: 2, got: n });
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i % n));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(CorrelationResult {
        r: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TiePolicy;

    fn ranks(r: &[(&str, u32)]) -> RankTable {
        RankTable {
            year: 2006,
            node: "GCI".into(),
            policy: TiePolicy::Competition,
            entries: r.iter().map(|(c, r)| (c.to_string(), *r)).collect(),
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        // 9! = 362880
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(4.5) - (11.631_728_396_567_448f64).ln()).abs() < 1e-13);
    }

    #[test]
    fn statistic_examples() {
        assert_eq!(chi_square_statistic(&[3.0, 5.0], &[3.0, 5.0]).unwrap(), 0.0);
        assert!(
            (chi_square_statistic(&[2.0, 4.0], &[3.0, 3.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15
        );
        assert!((chi_square_statistic(&[0.0, 6.0], &[3.0, 3.0]).unwrap() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn statistic_errors() {
        assert!(matches!(
            chi_square_statistic(&[1.0, 2.0], &[1.0]),
            Err(StatsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            chi_square_statistic(&[1.0, 2.0], &[1.0, 0.0]),
            Err(StatsError::NonPositiveExpected { index: 1, .. })
        ));
    }

    #[test]
    fn sf_closed_form_two_df() {
        assert_eq!(chi_square_sf(0.0, 7).unwrap(), 1.0);
        for x in [1.0f64, 2.0, 5.0] {
            assert!((chi_square_sf(x, 2).unwrap() - (-x / 2.0).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn table_values() {
        let crit = chi_square_isf(0.05, 9).unwrap();
        assert!((crit - 16.91898).abs() < 1e-4, "{crit}");
        let p = chi_square_sf(1.459644, 9).unwrap();
        assert!((p - 0.997435).abs() < 1e-5, "{p}");
    }

    #[test]
    fn isf_closed_form_two_df() {
        let x = chi_square_isf(0.05, 2).unwrap();
        assert!((x - (-2.0 * 0.05f64.ln())).abs() < 1e-6);
    }

    #[test]
    fn isf_rejects_bad_alpha() {
        assert!(chi_square_isf(0.0, 3).is_err());
        assert!(chi_square_isf(1.0, 3).is_err());
        assert!(chi_square_sf(1.0, 0).is_err());
    }

    #[test]
    fn homogeneity_identical_and_reversed() {
        let a = ranks(&[("A", 1), ("B", 2), ("C", 3)]);
        let r = rank_homogeneity_test(&a, &a, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.decision, Decision::DoNotReject);

        let b = ranks(&[("A", 3), ("B", 2), ("C", 1)]);
        let r = rank_homogeneity_test(&a, &b, 0.05).unwrap();
        assert!((r.statistic - 16.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.df, 2);
        assert!((r.critical_value - chi_square_isf(0.05, 2).unwrap()).abs() < 1e-15);
        assert_eq!(r.decision, Decision::DoNotReject);
    }

    #[test]
    fn decision_rule() {
        let r = chi_square_test(1.459644, 9, 0.05).unwrap();
        assert_eq!(r.decision, Decision::DoNotReject);
        let r = chi_square_test(20.0, 9, 0.05).unwrap();
        assert_eq!(r.decision, Decision::Reject);
        assert!(r.p_value < 0.05);
    }

    #[test]
    fn ols_examples() {
        let t = ols_fit(&[(2003, 1.0), (2004, 2.0), (2005, 3.0)]).unwrap();
        assert!((t.slope - 1.0).abs() < 1e-12);
        assert!((t.predict(2006.0) - 4.0).abs() < 1e-9);
        let t = ols_fit(&[(2003, 3.3), (2004, 3.3), (2006, 3.3)]).unwrap();
        assert!(t.slope.abs() < 1e-12);
        assert_eq!(
            ols_fit(&[(2003, 1.0), (2003, 2.0)]),
            Err(StatsError::DegenerateAbscissa)
        );
        assert!(ols_fit(&[(2003, 1.0)]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let aff: Vec<f64> = x.iter().map(|v| 2.5 * v + 3.0).collect();
        assert!((pearson(&x, &x).unwrap().r - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap().r + 1.0).abs() < 1e-12);
        assert!((pearson(&x, &aff).unwrap().r - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[2.0; 4]), Err(StatsError::ZeroVariance));
    }
}
